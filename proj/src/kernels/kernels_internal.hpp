#pragma once

#include <cstddef>

namespace endoagent::kernels {

namespace scalar {
double sum_sq_diff(const double* a, const double* b, std::size_t n);
void filter_rows(const double* src, std::size_t src_stride, double* dst, std::size_t out_w,
                 std::size_t rows, const double* taps, std::size_t ntaps);
void filter_cols(const double* src, std::size_t width, double* dst, std::size_t out_h,
                 const double* taps, std::size_t ntaps);
void correlate2d(const double* src, double* dst, std::size_t out_w, std::size_t out_h,
                 const double* kernel, std::size_t kw, std::size_t kh);
void safe_divide(const double* num, const double* den, double* dst, std::size_t n, double eps);
void multiply(const double* a, const double* b, double* dst, std::size_t n);
}  // namespace scalar

namespace avx2 {
double sum_sq_diff(const double* a, const double* b, std::size_t n);
void filter_rows(const double* src, std::size_t src_stride, double* dst, std::size_t out_w,
                 std::size_t rows, const double* taps, std::size_t ntaps);
void filter_cols(const double* src, std::size_t width, double* dst, std::size_t out_h,
                 const double* taps, std::size_t ntaps);
void correlate2d(const double* src, double* dst, std::size_t out_w, std::size_t out_h,
                 const double* kernel, std::size_t kw, std::size_t kh);
void safe_divide(const double* num, const double* den, double* dst, std::size_t n, double eps);
void multiply(const double* a, const double* b, double* dst, std::size_t n);
}  // namespace avx2

}  // namespace endoagent::kernels
