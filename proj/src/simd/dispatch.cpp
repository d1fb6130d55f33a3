#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cartoon/simd/kernels.hpp"

namespace cr::simd {

#if defined(CARTOON_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif
#if defined(CARTOON_HAVE_AVX512)
namespace avx512 {
const KernelTable& table();
}
#endif

namespace {

void scalar_sgemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
                  std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
  reference::gemm<float>(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void scalar_moments(const float* x, std::int64_t n, double* mean, double* m2) {
  reference::moments<float>(x, n, mean, m2);
}
void scalar_scale_shift(const float* x, float* y, std::int64_t n, float scale, float shift) {
  reference::scale_shift<float>(x, y, n, scale, shift);
}

const KernelTable kScalarTable{&scalar_sgemm, &scalar_moments, &scalar_scale_shift};

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> t{&kernels_for(default_isa())};
  return t;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> a{default_isa()};
  return a;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(CARTOON_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Avx512:
#if defined(CARTOON_HAVE_AVX512)
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() {
  if (isa_supported(Isa::Avx512)) return Isa::Avx512;
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  return Isa::Scalar;
}

Isa default_isa() {
  Isa isa = detected_isa();
  if (const char* env = std::getenv("CARTOON_SIMD")) {
    if (auto req = parse_isa(env); req && isa_supported(*req)) isa = *req;
  }
  return isa;
}

Isa active_isa() { return active().load(); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument(std::string("ISA not supported on this CPU/build: ") + isa_name(isa));
  }
  active_table().store(&kernels_for(isa));
  active().store(isa);
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Avx512:
      return "avx512";
  }
  return "?";
}

std::optional<Isa> parse_isa(std::string_view raw) {
  std::string name(raw);
  for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "avx512") return Isa::Avx512;
  return std::nullopt;
}

const KernelTable& kernels_for(Isa isa) {
  switch (isa) {
#if defined(CARTOON_HAVE_AVX2)
    case Isa::Avx2:
      return avx2::table();
#endif
#if defined(CARTOON_HAVE_AVX512)
    case Isa::Avx512:
      return avx512::table();
#endif
    default:
      return kScalarTable;
  }
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

}  // namespace cr::simd
