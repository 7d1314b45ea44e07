#include "endoagent/filters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "endoagent/error.hpp"
#include "endoagent/kernels.hpp"

namespace endoagent {

double Kernel2D::sum() const { return std::accumulate(taps.begin(), taps.end(), 0.0); }

Kernel2D Kernel2D::flipped() const {
  Kernel2D out{width, height, std::vector<double>(taps.rbegin(), taps.rend())};
  return out;
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

Plane pad_reflect(const Plane& src, int px, int py) {
  Plane out(src.width + 2 * px, src.height + 2 * py);
  for (int y = 0; y < out.height; ++y) {
    const int sy = reflect_index(y - py, src.height);
    const double* row = src.data.data() + static_cast<std::size_t>(sy) * src.width;
    double* dst = out.data.data() + static_cast<std::size_t>(y) * out.width;
    for (int x = 0; x < out.width; ++x) dst[x] = row[reflect_index(x - px, src.width)];
  }
  return out;
}

std::vector<double> gaussian_taps(int size, double sigma) {
  if (size < 1 || size % 2 == 0 || sigma <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "gaussian taps need odd size and sigma > 0");
  }
  std::vector<double> taps(static_cast<std::size_t>(size));
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= total;
  return taps;
}

std::vector<double> box_taps(int size) {
  return std::vector<double>(static_cast<std::size_t>(size), 1.0 / size);
}

Plane filter_separable_valid(const Plane& src, const std::vector<double>& taps_x,
                             const std::vector<double>& taps_y) {
  const int nx = static_cast<int>(taps_x.size());
  const int ny = static_cast<int>(taps_y.size());
  const int out_w = src.width - nx + 1;
  const int out_h = src.height - ny + 1;
  if (nx < 1 || ny < 1 || out_w < 1 || out_h < 1) {
    throw Error(ErrorCode::TooSmall, "plane smaller than filter support");
  }
  const auto& k = kernels::active();
  Plane rows(out_w, src.height);
  k.filter_rows(src.data.data(), static_cast<std::size_t>(src.width), rows.data.data(),
                static_cast<std::size_t>(out_w), static_cast<std::size_t>(src.height),
                taps_x.data(), taps_x.size());
  Plane out(out_w, out_h);
  k.filter_cols(rows.data.data(), static_cast<std::size_t>(out_w), out.data.data(),
                static_cast<std::size_t>(out_h), taps_y.data(), taps_y.size());
  return out;
}

Plane filter_separable_same(const Plane& src, const std::vector<double>& taps_x,
                            const std::vector<double>& taps_y) {
  if (taps_x.size() % 2 == 0 || taps_y.size() % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "same-size filtering needs odd tap counts");
  }
  const Plane padded = pad_reflect(src, static_cast<int>(taps_x.size() / 2),
                                   static_cast<int>(taps_y.size() / 2));
  return filter_separable_valid(padded, taps_x, taps_y);
}

Plane correlate_valid(const Plane& src, const Kernel2D& kernel) {
  const int out_w = src.width - kernel.width + 1;
  const int out_h = src.height - kernel.height + 1;
  if (kernel.width < 1 || kernel.height < 1 || out_w < 1 || out_h < 1) {
    throw Error(ErrorCode::TooSmall, "plane smaller than kernel support");
  }
  Plane out(out_w, out_h);
  const auto nonzero = static_cast<std::size_t>(
      std::count_if(kernel.taps.begin(), kernel.taps.end(), [](double t) { return t != 0.0; }));
  if (2 * nonzero < kernel.taps.size()) {
    // Line kernels (motion blur) are mostly zeros: accumulate one shifted
    // row per nonzero tap instead of the dense window.
    for (int ky = 0; ky < kernel.height; ++ky) {
      for (int kx = 0; kx < kernel.width; ++kx) {
        const double w = kernel.taps[static_cast<std::size_t>(ky) * kernel.width + kx];
        if (w == 0.0) continue;
        for (int y = 0; y < out_h; ++y) {
          const double* s = &src.data[static_cast<std::size_t>(y + ky) * src.width + kx];
          double* d = &out.data[static_cast<std::size_t>(y) * out_w];
          for (int x = 0; x < out_w; ++x) d[x] += w * s[x];
        }
      }
    }
    return out;
  }
  kernels::active().correlate2d(src.data.data(), out.data.data(), static_cast<std::size_t>(out_w),
                                static_cast<std::size_t>(out_h), kernel.taps.data(),
                                static_cast<std::size_t>(kernel.width),
                                static_cast<std::size_t>(kernel.height));
  return out;
}

Plane correlate_same(const Plane& src, const Kernel2D& kernel) {
  if (kernel.width % 2 == 0 || kernel.height % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "same-size correlation needs odd kernel dimensions");
  }
  return correlate_valid(pad_reflect(src, kernel.width / 2, kernel.height / 2), kernel);
}

Plane multiply(const Plane& a, const Plane& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "multiply operands differ in size");
  }
  Plane out(a.width, a.height);
  kernels::active().multiply(a.data.data(), b.data.data(), out.data.data(), a.size());
  return out;
}

Plane safe_divide(const Plane& num, const Plane& den, double eps) {
  if (num.width != den.width || num.height != den.height) {
    throw Error(ErrorCode::DimensionMismatch, "divide operands differ in size");
  }
  Plane out(num.width, num.height);
  kernels::active().safe_divide(num.data.data(), den.data.data(), out.data.data(), num.size(), eps);
  return out;
}

Plane median3x3(const Plane& src) {
  Plane out(src.width, src.height);
  std::array<double, 9> window{};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          window[static_cast<std::size_t>(n++)] =
              src.at(reflect_index(x + dx, src.width), reflect_index(y + dy, src.height));
        }
      }
      std::nth_element(window.begin(), window.begin() + 4, window.end());
      out.at(x, y) = window[4];
    }
  }
  return out;
}

Plane min_filter(const Plane& src, int radius) {
  // Separable: row minima, then column minima.
  Plane rows(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double m = src.at(x, y);
      for (int d = -radius; d <= radius; ++d) {
        m = std::min(m, src.at(reflect_index(x + d, src.width), y));
      }
      rows.at(x, y) = m;
    }
  }
  Plane out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double m = rows.at(x, y);
      for (int d = -radius; d <= radius; ++d) {
        m = std::min(m, rows.at(x, reflect_index(y + d, src.height)));
      }
      out.at(x, y) = m;
    }
  }
  return out;
}

Plane box_mean(const Plane& src, int radius) {
  const auto taps = box_taps(2 * radius + 1);
  return filter_separable_same(src, taps, taps);
}

}  // namespace endoagent
