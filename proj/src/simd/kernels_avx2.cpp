// AVX2 + FMA variants. Compiled with -mavx2 -mfma.

#include <immintrin.h>

#include "cartoon/simd/kernels.hpp"
#include "gemm_blocked.hpp"

namespace cr::simd::avx2 {
namespace {

// 6 x 16 tile: 12 ymm accumulators.
struct Kernel {
  static constexpr std::int64_t MR = 6;
  static constexpr std::int64_t NR = 16;
  static constexpr std::int64_t MC = 144;

  static void compute(std::int64_t kc, const float* ap, const float* bp, float* c, std::int64_t ldc, float alpha,
                      float beta) {
    __m256 acc[MR][2];
#pragma GCC unroll 6
    for (int r = 0; r < MR; ++r) {
      acc[r][0] = _mm256_setzero_ps();
      acc[r][1] = _mm256_setzero_ps();
    }
    for (std::int64_t p = 0; p < kc; ++p) {
      const __m256 b0 = _mm256_load_ps(bp);
      const __m256 b1 = _mm256_load_ps(bp + 8);
#pragma GCC unroll 6
      for (int r = 0; r < MR; ++r) {
        const __m256 av = _mm256_broadcast_ss(ap + r);
        acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
        acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
      }
      ap += MR;
      bp += NR;
    }
    const __m256 va = _mm256_set1_ps(alpha);
    if (beta == 0.0f) {
#pragma GCC unroll 6
      for (int r = 0; r < MR; ++r) {
        _mm256_storeu_ps(c + r * ldc, _mm256_mul_ps(va, acc[r][0]));
        _mm256_storeu_ps(c + r * ldc + 8, _mm256_mul_ps(va, acc[r][1]));
      }
    } else {
      const __m256 vb = _mm256_set1_ps(beta);
#pragma GCC unroll 6
      for (int r = 0; r < MR; ++r) {
        float* row = c + r * ldc;
        _mm256_storeu_ps(row, _mm256_fmadd_ps(va, acc[r][0], _mm256_mul_ps(vb, _mm256_loadu_ps(row))));
        _mm256_storeu_ps(row + 8, _mm256_fmadd_ps(va, acc[r][1], _mm256_mul_ps(vb, _mm256_loadu_ps(row + 8))));
      }
    }
  }
};

void sgemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
           std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
  detail::BlockedGemm<Kernel>::run(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void moments(const float* x, std::int64_t n, double* mean, double* m2) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    s0 = _mm256_add_pd(s0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    s1 = _mm256_add_pd(s1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  const double mu = n > 0 ? s / static_cast<double>(n) : 0.0;

  const __m256d vm = _mm256_set1_pd(mu);
  __m256d q0 = _mm256_setzero_pd(), q1 = _mm256_setzero_pd();
  i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(v)), vm);
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)), vm);
    q0 = _mm256_fmadd_pd(d0, d0, q0);
    q1 = _mm256_fmadd_pd(d1, d1, q1);
  }
  double q = hsum(_mm256_add_pd(q0, q1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mu;
    q += d * d;
  }
  *mean = mu;
  *m2 = q;
}

void scale_shift(const float* x, float* y, std::int64_t n, float scale, float shift) {
  const __m256 a = _mm256_set1_ps(scale);
  const __m256 b = _mm256_set1_ps(shift);
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(_mm256_loadu_ps(x + i), a, b));
  for (; i < n; ++i) y[i] = x[i] * scale + shift;
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{&sgemm, &moments, &scale_shift};
  return t;
}

}  // namespace cr::simd::avx2
