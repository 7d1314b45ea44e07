#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace endoagent {

/// Single-channel real-valued raster, row-major. Used as the working format
/// for filtering; values are not range-checked.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

/// Interleaved RGB image with intensities normalized to [0,1].
///
/// The constructor validates the layout and range invariants; once built the
/// buffer is treated as an immutable value.
class ImageBuf {
 public:
  static constexpr int kChannels = 3;

  ImageBuf() = default;
  /// Throws InvariantViolation on a size mismatch or an out-of-range value.
  ImageBuf(int width, int height, std::vector<double> data);
  /// Clamps every value into [0,1] before construction. NaN maps to 0.
  static ImageBuf from_unclamped(int width, int height, std::vector<double> data);
  static ImageBuf filled(int width, int height, double r, double g, double b);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::span<const double> data() const noexcept { return data_; }

  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  Plane channel(int c) const;
  /// ITU-R BT.601 luma.
  Plane luminance() const;
  static ImageBuf from_planes(const Plane& r, const Plane& g, const Plane& b);

  double mean() const;
  ImageBuf flipped_horizontal() const;

  friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

}  // namespace endoagent
