// AVX-512F variants. Compiled with -mavx512f -mavx512dq -mfma; only reached
// through the dispatch table after a CPUID check.

#include <immintrin.h>

#include "cartoon/simd/kernels.hpp"
#include "gemm_blocked.hpp"

namespace cr::simd::avx512 {
namespace {

// 12 x 32 tile: 24 zmm accumulators, two B vectors, one broadcast.
struct Kernel {
  static constexpr std::int64_t MR = 12;
  static constexpr std::int64_t NR = 32;
  static constexpr std::int64_t MC = 144;

  static void compute(std::int64_t kc, const float* ap, const float* bp, float* c, std::int64_t ldc, float alpha,
                      float beta) {
    __m512 acc[MR][2];
#pragma GCC unroll 12
    for (int r = 0; r < MR; ++r) {
      acc[r][0] = _mm512_setzero_ps();
      acc[r][1] = _mm512_setzero_ps();
    }
    for (std::int64_t p = 0; p < kc; ++p) {
      const __m512 b0 = _mm512_load_ps(bp);
      const __m512 b1 = _mm512_load_ps(bp + 16);
#pragma GCC unroll 12
      for (int r = 0; r < MR; ++r) {
        const __m512 av = _mm512_set1_ps(ap[r]);
        acc[r][0] = _mm512_fmadd_ps(av, b0, acc[r][0]);
        acc[r][1] = _mm512_fmadd_ps(av, b1, acc[r][1]);
      }
      ap += MR;
      bp += NR;
    }
    const __m512 va = _mm512_set1_ps(alpha);
    if (beta == 0.0f) {
#pragma GCC unroll 12
      for (int r = 0; r < MR; ++r) {
        _mm512_storeu_ps(c + r * ldc, _mm512_mul_ps(va, acc[r][0]));
        _mm512_storeu_ps(c + r * ldc + 16, _mm512_mul_ps(va, acc[r][1]));
      }
    } else {
      const __m512 vb = _mm512_set1_ps(beta);
#pragma GCC unroll 12
      for (int r = 0; r < MR; ++r) {
        float* row = c + r * ldc;
        _mm512_storeu_ps(row, _mm512_fmadd_ps(va, acc[r][0], _mm512_mul_ps(vb, _mm512_loadu_ps(row))));
        _mm512_storeu_ps(row + 16, _mm512_fmadd_ps(va, acc[r][1], _mm512_mul_ps(vb, _mm512_loadu_ps(row + 16))));
      }
    }
  }
};

void sgemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
           std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
  detail::BlockedGemm<Kernel>::run(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

double hsum(__m512d v) { return _mm512_reduce_add_pd(v); }

void moments(const float* x, std::int64_t n, double* mean, double* m2) {
  __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
  std::int64_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(x + i);
    s0 = _mm512_add_pd(s0, _mm512_cvtps_pd(_mm512_castps512_ps256(v)));
    s1 = _mm512_add_pd(s1, _mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(v), 1))));
  }
  double s = hsum(_mm512_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  const double mu = n > 0 ? s / static_cast<double>(n) : 0.0;

  const __m512d vm = _mm512_set1_pd(mu);
  __m512d q0 = _mm512_setzero_pd(), q1 = _mm512_setzero_pd();
  i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(x + i);
    const __m512d d0 = _mm512_sub_pd(_mm512_cvtps_pd(_mm512_castps512_ps256(v)), vm);
    const __m512d d1 =
        _mm512_sub_pd(_mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(v), 1))), vm);
    q0 = _mm512_fmadd_pd(d0, d0, q0);
    q1 = _mm512_fmadd_pd(d1, d1, q1);
  }
  double q = hsum(_mm512_add_pd(q0, q1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mu;
    q += d * d;
  }
  *mean = mu;
  *m2 = q;
}

void scale_shift(const float* x, float* y, std::int64_t n, float scale, float shift) {
  const __m512 a = _mm512_set1_ps(scale);
  const __m512 b = _mm512_set1_ps(shift);
  std::int64_t i = 0;
  for (; i + 16 <= n; i += 16) _mm512_storeu_ps(y + i, _mm512_fmadd_ps(_mm512_loadu_ps(x + i), a, b));
  if (i < n) {
    const __mmask16 mask = static_cast<__mmask16>((1u << (n - i)) - 1u);
    _mm512_mask_storeu_ps(y + i, mask, _mm512_fmadd_ps(_mm512_maskz_loadu_ps(mask, x + i), a, b));
  }
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{&sgemm, &moments, &scale_shift};
  return t;
}

}  // namespace cr::simd::avx512
