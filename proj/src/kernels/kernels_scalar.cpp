#include "kernels_internal.hpp"

namespace endoagent::kernels::scalar {

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void filter_rows(const double* src, std::size_t src_stride, double* dst, std::size_t out_w,
                 std::size_t rows, const double* taps, std::size_t ntaps) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = src + r * src_stride;
    double* d = dst + r * out_w;
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ntaps; ++k) acc += taps[k] * s[x + k];
      d[x] = acc;
    }
  }
}

void filter_cols(const double* src, std::size_t width, double* dst, std::size_t out_h,
                 const double* taps, std::size_t ntaps) {
  for (std::size_t y = 0; y < out_h; ++y) {
    double* d = dst + y * width;
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ntaps; ++k) acc += taps[k] * src[(y + k) * width + x];
      d[x] = acc;
    }
  }
}

void correlate2d(const double* src, double* dst, std::size_t out_w, std::size_t out_h,
                 const double* kernel, std::size_t kw, std::size_t kh) {
  const std::size_t src_w = out_w + kw - 1;
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const double* s = src + (y + ky) * src_w + x;
        const double* k = kernel + ky * kw;
        for (std::size_t kx = 0; kx < kw; ++kx) acc += k[kx] * s[kx];
      }
      dst[y * out_w + x] = acc;
    }
  }
}

void safe_divide(const double* num, const double* den, double* dst, std::size_t n, double eps) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = num[i] / (den[i] > eps ? den[i] : eps);
}

void multiply(const double* a, const double* b, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

}  // namespace endoagent::kernels::scalar
