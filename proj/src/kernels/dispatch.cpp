#include <cstdlib>
#include <string_view>

#include "endoagent/kernels.hpp"
#include "kernels_internal.hpp"

namespace endoagent::kernels {

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar,         scalar::sum_sq_diff, scalar::filter_rows,
                                 scalar::filter_cols, scalar::correlate2d, scalar::safe_divide,
                                 scalar::multiply};
  return table;
}

const KernelTable* avx2_table() noexcept {
#if defined(ENDOAGENT_WITH_AVX2)
  static const KernelTable table{Isa::Avx2,         avx2::sum_sq_diff, avx2::filter_rows,
                                 avx2::filter_cols, avx2::correlate2d, avx2::safe_divide,
                                 avx2::multiply};
  return &table;
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const char* forced = std::getenv("ENDOAGENT_ISA");
        forced != nullptr && std::string_view(forced) == "scalar") {
      return scalar_table();
    }
    if (const KernelTable* t = avx2_table(); t != nullptr && cpu_supports_avx2()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace endoagent::kernels
