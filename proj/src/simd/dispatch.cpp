#include <atomic>
#include <cstdlib>
#include <string_view>

#include "partprobe/simd.hpp"

namespace partprobe::simd {

#if defined(PARTPROBE_HAVE_AVX2)
const KernelTable& avx2_kernel_table() noexcept;
#endif

const KernelTable* avx2_kernels() noexcept {
#if defined(PARTPROBE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("PARTPROBE_SIMD")) {
    if (std::string_view(env) == "scalar") return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{pick_default()};
  return slot;
}

}  // namespace

const KernelTable& active_kernels() noexcept {
  return *active_slot().load(std::memory_order_relaxed);
}

void set_active_kernels(const KernelTable& table) noexcept {
  active_slot().store(&table, std::memory_order_relaxed);
}

}  // namespace partprobe::simd
