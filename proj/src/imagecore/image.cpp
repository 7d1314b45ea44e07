#include "endoagent/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "endoagent/error.hpp"

namespace endoagent {

ImageBuf::ImageBuf(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 ||
      data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw Error(ErrorCode::InvariantViolation,
                "image data length " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(width) + "x" + std::to_string(height) + "x3");
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvariantViolation, "intensity outside [0,1]");
    }
  }
}

ImageBuf ImageBuf::from_unclamped(int width, int height, std::vector<double> data) {
  for (double& v : data) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return ImageBuf(width, height, std::move(data));
}

ImageBuf ImageBuf::filled(int width, int height, double r, double g, double b) {
  std::vector<double> data(static_cast<std::size_t>(width) * height * kChannels);
  for (std::size_t i = 0; i < data.size(); i += kChannels) {
    data[i] = r;
    data[i + 1] = g;
    data[i + 2] = b;
  }
  return ImageBuf(width, height, std::move(data));
}

Plane ImageBuf::channel(int c) const {
  Plane p(width_, height_);
  for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = data_[i * kChannels + c];
  return p;
}

Plane ImageBuf::luminance() const {
  Plane p(width_, height_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double* px = data_.data() + i * kChannels;
    p.data[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return p;
}

ImageBuf ImageBuf::from_planes(const Plane& r, const Plane& g, const Plane& b) {
  if (r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "channel planes differ in size");
  }
  std::vector<double> data(r.size() * kChannels);
  for (std::size_t i = 0; i < r.size(); ++i) {
    data[i * kChannels] = r.data[i];
    data[i * kChannels + 1] = g.data[i];
    data[i * kChannels + 2] = b.data[i];
  }
  return from_unclamped(r.width, r.height, std::move(data));
}

double ImageBuf::mean() const {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

ImageBuf ImageBuf::flipped_horizontal() const {
  std::vector<double> out(data_.size());
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t src = (static_cast<std::size_t>(y) * width_ + x) * kChannels;
      const std::size_t dst =
          (static_cast<std::size_t>(y) * width_ + (width_ - 1 - x)) * kChannels;
      for (int c = 0; c < kChannels; ++c) out[dst + c] = data_[src + c];
    }
  }
  return ImageBuf(width_, height_, std::move(out));
}

}  // namespace endoagent
