#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant. The variant is picked
// once at first use from the running CPU; set ENDOAGENT_ISA=scalar to force the
// reference path.

#include <cstddef>
#include <string_view>

namespace endoagent::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  // sum_i (a_i - b_i)^2
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);

  // Valid-mode horizontal correlation. Each of `rows` source rows holds
  // out_w + ntaps - 1 samples at `src_stride`; dst rows are packed at out_w.
  void (*filter_rows)(const double* src, std::size_t src_stride, double* dst, std::size_t out_w,
                      std::size_t rows, const double* taps, std::size_t ntaps);

  // Valid-mode vertical correlation over a packed `width`-wide source of
  // out_h + ntaps - 1 rows.
  void (*filter_cols)(const double* src, std::size_t width, double* dst, std::size_t out_h,
                      const double* taps, std::size_t ntaps);

  // Valid-mode dense 2-D correlation. The source is (out_w + kw - 1) wide and
  // (out_h + kh - 1) tall; the kernel is kh rows of kw taps.
  void (*correlate2d)(const double* src, double* dst, std::size_t out_w, std::size_t out_h,
                      const double* kernel, std::size_t kw, std::size_t kh);

  // dst_i = num_i / max(den_i, eps)
  void (*safe_divide)(const double* num, const double* den, double* dst, std::size_t n,
                      double eps);

  // dst_i = a_i * b_i
  void (*multiply)(const double* a, const double* b, double* dst, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the AVX2 translation unit was not built.
const KernelTable* avx2_table() noexcept;
bool cpu_supports_avx2() noexcept;

/// The table used by the rest of the library.
const KernelTable& active() noexcept;

}  // namespace endoagent::kernels
