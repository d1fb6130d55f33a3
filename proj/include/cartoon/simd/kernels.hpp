#pragma once

// Hot inner loops of the network: dense matrix multiply (every convolution and
// fully-connected layer lowers onto it), per-plane moments for instance
// statistics, and the per-plane affine map used by normalization/AdaIN.
//
// Every kernel has a scalar reference implementation plus AVX2 and AVX-512
// variants. The variant is selected once at startup from CPUID and may be
// overridden with CARTOON_SIMD=scalar|avx2|avx512 or set_active_isa().

#include <cstdint>
#include <optional>
#include <string_view>

namespace cr::simd {

enum class Isa { Scalar, Avx2, Avx512 };
enum class Trans : bool { No = false, Yes = true };

/// Best ISA the running CPU supports (and this build was compiled for).
Isa detected_isa();
/// detected_isa() unless CARTOON_SIMD names another supported ISA.
Isa default_isa();
Isa active_isa();
/// Throws std::invalid_argument if the CPU cannot run `isa`.
void set_active_isa(Isa isa);
bool isa_supported(Isa isa);
const char* isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

struct KernelTable {
  /// Row-major C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
  /// beta == 0 never reads C.
  void (*sgemm)(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha,
                const float* a, std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c,
                std::int64_t ldc);
  /// mean and sum of squared deviations of x[0..n), accumulated in double.
  void (*moments)(const float* x, std::int64_t n, double* mean, double* m2);
  /// y[i] = x[i] * scale + shift. x and y may alias.
  void (*scale_shift)(const float* x, float* y, std::int64_t n, float scale, float shift);
};

const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);

namespace reference {

template <typename T>
void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          std::int64_t lda, const T* b, std::int64_t ldb, T beta, T* c, std::int64_t ldc) {
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (std::int64_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (std::int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = alpha * (ta == Trans::Yes ? a[p * lda + i] : a[i * lda + p]);
      if (tb == Trans::No) {
        const T* brow = b + p * ldb;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      }
    }
  }
}

template <typename T>
void moments(const T* x, std::int64_t n, double* mean, double* m2) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  const double mu = n > 0 ? s / static_cast<double>(n) : 0.0;
  double q = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mu;
    q += d * d;
  }
  *mean = mu;
  *m2 = q;
}

template <typename T>
void scale_shift(const T* x, T* y, std::int64_t n, T scale, T shift) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] * scale + shift;
}

}  // namespace reference

// Typed front-ends: float goes through the active kernel table, double
// always uses the reference path (double is the gradient-checking precision).

inline void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
                 std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
  kernels().sgemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, double alpha, const double* a,
                 std::int64_t lda, const double* b, std::int64_t ldb, double beta, double* c, std::int64_t ldc) {
  reference::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void moments(const float* x, std::int64_t n, double* mean, double* m2) { kernels().moments(x, n, mean, m2); }
inline void moments(const double* x, std::int64_t n, double* mean, double* m2) {
  reference::moments(x, n, mean, m2);
}
inline void scale_shift(const float* x, float* y, std::int64_t n, float scale, float shift) {
  kernels().scale_shift(x, y, n, scale, shift);
}
inline void scale_shift(const double* x, double* y, std::int64_t n, double scale, double shift) {
  reference::scale_shift(x, y, n, scale, shift);
}

}  // namespace cr::simd
