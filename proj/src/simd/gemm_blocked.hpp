#pragma once

// Cache-blocked GEMM driver shared by the vector ISAs. Included only from
// translation units compiled with the matching -m flags so that packing code
// is vectorized for the same target as the micro-kernel.
//
// Blocking follows the usual five-loop layout: NC columns of B are packed
// into NR-wide panels per KC slice, MC rows of A into MR-tall panels, and the
// micro-kernel accumulates one MR x NR tile of C in registers. Accumulation
// order along k is fixed by KC, so every element of C sees the same
// summation order regardless of its position or the matrix extents.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cartoon/simd/kernels.hpp"
#include "cartoon/tensor.hpp"

namespace cr::simd::detail {

inline constexpr std::int64_t kKC = 256;
inline constexpr std::int64_t kNC = 1024;

template <typename Kernel>
struct BlockedGemm {
  static constexpr std::int64_t MR = Kernel::MR;
  static constexpr std::int64_t NR = Kernel::NR;
  static constexpr std::int64_t MC = Kernel::MC;

  static void pack_a(Trans ta, const float* a, std::int64_t lda, std::int64_t i0, std::int64_t mc, std::int64_t p0,
                     std::int64_t kc, float* dst) {
    for (std::int64_t ir = 0; ir < mc; ir += MR) {
      const std::int64_t mr = std::min(MR, mc - ir);
      if (ta == Trans::No) {
        for (std::int64_t p = 0; p < kc; ++p) {
          std::int64_t r = 0;
          for (; r < mr; ++r) dst[p * MR + r] = a[(i0 + ir + r) * lda + p0 + p];
          for (; r < MR; ++r) dst[p * MR + r] = 0.0f;
        }
      } else {
        for (std::int64_t p = 0; p < kc; ++p) {
          const float* src = a + (p0 + p) * lda + i0 + ir;
          std::int64_t r = 0;
          for (; r < mr; ++r) dst[p * MR + r] = src[r];
          for (; r < MR; ++r) dst[p * MR + r] = 0.0f;
        }
      }
      dst += kc * MR;
    }
  }

  static void pack_b(Trans tb, const float* b, std::int64_t ldb, std::int64_t p0, std::int64_t kc, std::int64_t j0,
                     std::int64_t nc, float* dst) {
    for (std::int64_t jr = 0; jr < nc; jr += NR) {
      const std::int64_t nr = std::min(NR, nc - jr);
      if (tb == Trans::No) {
        for (std::int64_t p = 0; p < kc; ++p) {
          const float* src = b + (p0 + p) * ldb + j0 + jr;
          std::int64_t c = 0;
          for (; c < nr; ++c) dst[p * NR + c] = src[c];
          for (; c < NR; ++c) dst[p * NR + c] = 0.0f;
        }
      } else {
        for (std::int64_t p = 0; p < kc; ++p) {
          std::int64_t c = 0;
          for (; c < nr; ++c) dst[p * NR + c] = b[(j0 + jr + c) * ldb + p0 + p];
          for (; c < NR; ++c) dst[p * NR + c] = 0.0f;
        }
      }
      dst += kc * NR;
    }
  }

  static void scale_c(std::int64_t m, std::int64_t n, float beta, float* c, std::int64_t ldc) {
    for (std::int64_t i = 0; i < m; ++i) {
      float* row = c + i * ldc;
      if (beta == 0.0f) {
        std::fill(row, row + n, 0.0f);
      } else {
        for (std::int64_t j = 0; j < n; ++j) row[j] *= beta;
      }
    }
  }

  static void run(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
                  std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0 || alpha == 0.0f) {
      scale_c(m, n, beta, c, ldc);
      return;
    }
    thread_local std::vector<float, TrackingAllocator<float>> abuf, bbuf;
    const std::int64_t a_need = MC * kKC;
    const std::int64_t b_need = ((kNC + NR - 1) / NR) * NR * kKC;
    if (static_cast<std::int64_t>(abuf.size()) < a_need) abuf.resize(static_cast<std::size_t>(a_need));
    if (static_cast<std::int64_t>(bbuf.size()) < b_need) bbuf.resize(static_cast<std::size_t>(b_need));
    alignas(64) float edge[MR * NR];

    for (std::int64_t jc = 0; jc < n; jc += kNC) {
      const std::int64_t nc = std::min(kNC, n - jc);
      for (std::int64_t pc = 0; pc < k; pc += kKC) {
        const std::int64_t kc = std::min(kKC, k - pc);
        const float beta_eff = pc == 0 ? beta : 1.0f;
        pack_b(tb, b, ldb, pc, kc, jc, nc, bbuf.data());
        for (std::int64_t ic = 0; ic < m; ic += MC) {
          const std::int64_t mc = std::min(MC, m - ic);
          pack_a(ta, a, lda, ic, mc, pc, kc, abuf.data());
          for (std::int64_t jr = 0; jr < nc; jr += NR) {
            const std::int64_t nr = std::min(NR, nc - jr);
            const float* bp = bbuf.data() + (jr / NR) * kc * NR;
            for (std::int64_t ir = 0; ir < mc; ir += MR) {
              const std::int64_t mr = std::min(MR, mc - ir);
              const float* ap = abuf.data() + (ir / MR) * kc * MR;
              float* ctile = c + (ic + ir) * ldc + jc + jr;
              if (mr == MR && nr == NR) {
                Kernel::compute(kc, ap, bp, ctile, ldc, alpha, beta_eff);
              } else {
                Kernel::compute(kc, ap, bp, edge, NR, alpha, 0.0f);
                for (std::int64_t r = 0; r < mr; ++r) {
                  float* crow = ctile + r * ldc;
                  const float* erow = edge + r * NR;
                  if (beta_eff == 0.0f) {
                    for (std::int64_t j = 0; j < nr; ++j) crow[j] = erow[j];
                  } else {
                    for (std::int64_t j = 0; j < nr; ++j) crow[j] = erow[j] + beta_eff * crow[j];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
};

}  // namespace cr::simd::detail
