#include <chrono>
#include <cstdio>
#include <random>
#include <vector>
#include "cartoon/simd/kernels.hpp"
using namespace cr::simd;
int main() {
  for (Isa isa : {Isa::Avx2, Isa::Avx512}) {
    set_active_isa(isa);
    for (int s : {256, 512, 1024}) {
      int m = s / 2, n = s * 4, k = s * 2;
      std::vector<float> a(m * k), b(k * n), c(m * n);
      std::mt19937 g(1); std::normal_distribution<float> d;
      for (auto& x : a) x = d(g); for (auto& x : b) x = d(g);
      gemm(Trans::No, Trans::No, m, n, k, 1.f, a.data(), k, b.data(), n, 0.f, c.data(), n);
      auto t = std::chrono::steady_clock::now();
      int reps = 5;
      for (int r = 0; r < reps; ++r) gemm(Trans::No, Trans::No, m, n, k, 1.f, a.data(), k, b.data(), n, 0.f, c.data(), n);
      double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
      std::printf("%s m=%d n=%d k=%d %.1f GFLOPS\n", isa_name(isa), m, n, k, 2.0 * m * n * k * reps / dt / 1e9);
    }
  }
}
