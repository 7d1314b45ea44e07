#include <immintrin.h>

#include "kernels_internal.hpp"

#if !defined(__AVX2__) || !defined(__FMA__)
#error "kernels_avx2.cpp must be compiled with -mavx2 -mfma"
#endif

namespace endoagent::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
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
    std::size_t x = 0;
    for (; x + 4 <= out_w; x += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < ntaps; ++k) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(s + x + k), acc);
      }
      _mm256_storeu_pd(d + x, acc);
    }
    for (; x < out_w; ++x) {
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
    std::size_t x = 0;
    for (; x + 4 <= width; x += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < ntaps; ++k) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(src + (y + k) * width + x),
                              acc);
      }
      _mm256_storeu_pd(d + x, acc);
    }
    for (; x < width; ++x) {
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
    std::size_t x = 0;
    for (; x + 4 <= out_w; x += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const double* s = src + (y + ky) * src_w + x;
        const double* k = kernel + ky * kw;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          if (k[kx] == 0.0) continue;
          acc = _mm256_fmadd_pd(_mm256_set1_pd(k[kx]), _mm256_loadu_pd(s + kx), acc);
        }
      }
      _mm256_storeu_pd(dst + y * out_w + x, acc);
    }
    for (; x < out_w; ++x) {
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
  const __m256d e = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_max_pd(_mm256_loadu_pd(den + i), e);
    _mm256_storeu_pd(dst + i, _mm256_div_pd(_mm256_loadu_pd(num + i), d));
  }
  for (; i < n; ++i) dst[i] = num[i] / (den[i] > eps ? den[i] : eps);
}

void multiply(const double* a, const double* b, double* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

}  // namespace endoagent::kernels::avx2
