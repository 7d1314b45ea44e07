#pragma once

#include <vector>

#include "endoagent/image.hpp"

namespace endoagent {

/// Dense correlation kernel, `height` rows of `width` taps.
struct Kernel2D {
  int width = 0;
  int height = 0;
  std::vector<double> taps;

  double at(int x, int y) const { return taps[static_cast<std::size_t>(y) * width + x]; }
  double sum() const;
  Kernel2D flipped() const;
};

/// Symmetric reflection (edge sample repeated): ... c b a | a b c ...
int reflect_index(int i, int n) noexcept;

/// Grows the plane by px columns and py rows on every side.
Plane pad_reflect(const Plane& src, int px, int py);

/// Normalized 1-D Gaussian taps of odd `size`.
std::vector<double> gaussian_taps(int size, double sigma);
std::vector<double> box_taps(int size);

/// Separable correlation without padding; output shrinks by taps-1.
Plane filter_separable_valid(const Plane& src, const std::vector<double>& taps_x,
                             const std::vector<double>& taps_y);
/// Separable correlation with reflected borders; output matches input size.
/// Tap counts must be odd.
Plane filter_separable_same(const Plane& src, const std::vector<double>& taps_x,
                            const std::vector<double>& taps_y);

Plane correlate_valid(const Plane& src, const Kernel2D& kernel);
/// Dense correlation with reflected borders. Kernel dimensions must be odd.
Plane correlate_same(const Plane& src, const Kernel2D& kernel);

Plane multiply(const Plane& a, const Plane& b);
Plane safe_divide(const Plane& num, const Plane& den, double eps);

/// 3x3 median with reflected borders.
Plane median3x3(const Plane& src);
/// Minimum over a (2r+1)^2 window with reflected borders.
Plane min_filter(const Plane& src, int radius);
/// Box mean over a (2r+1)^2 window with reflected borders.
Plane box_mean(const Plane& src, int radius);

}  // namespace endoagent
