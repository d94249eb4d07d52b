#include <atomic>
#include <cstdlib>

#include "kernels_internal.hpp"
#include "rformer/simd/kernels.hpp"

namespace rformer::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_choice() {
  Isa want = Isa::kAvx2;
  if (const char* env = std::getenv("RFORMER_SIMD")) {
    Isa parsed;
    if (parse_isa(env, parsed)) want = parsed;
  }
  if (want == Isa::kAvx2) {
    if (const KernelTable* t = avx2_kernels()) return t;
  }
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_choice()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(RFORMER_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::kScalar ? &scalar_kernels() : avx2_kernels();
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

bool parse_isa(std::string_view name, Isa& out) {
  if (name == "scalar") {
    out = Isa::kScalar;
    return true;
  }
  if (name == "avx2" || name == "auto") {
    out = Isa::kAvx2;
    return true;
  }
  return false;
}

}  // namespace rformer::simd
