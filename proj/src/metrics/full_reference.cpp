#include <cmath>

#include "endoagent/error.hpp"
#include "endoagent/filters.hpp"
#include "endoagent/kernels.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::metrics {
namespace {

void require_same_size(const ImageBuf& a, const ImageBuf& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "images differ in size");
  }
}

}  // namespace

double psnr(const ImageBuf& ref, const ImageBuf& test) {
  require_same_size(ref, test);
  const auto a = ref.data();
  const auto b = test.data();
  if (a.empty()) throw Error(ErrorCode::TooSmall, "empty image");
  const double mse = kernels::active().sum_sq_diff(a.data(), b.data(), a.size()) /
                     static_cast<double>(a.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuf& ref, const ImageBuf& test, const SsimParams& params) {
  require_same_size(ref, test);
  if (ref.width() < params.window || ref.height() < params.window) {
    throw Error(ErrorCode::TooSmall, "ssim needs images at least as large as the window");
  }
  const Plane x = ref.luminance();
  const Plane y = test.luminance();
  const auto taps = gaussian_taps(params.window, params.sigma);
  const Plane mu_x = filter_separable_valid(x, taps, taps);
  const Plane mu_y = filter_separable_valid(y, taps, taps);
  const Plane xx = filter_separable_valid(multiply(x, x), taps, taps);
  const Plane yy = filter_separable_valid(multiply(y, y), taps, taps);
  const Plane xy = filter_separable_valid(multiply(x, y), taps, taps);

  const double c1 = params.k1 * params.k1;
  const double c2 = params.k2 * params.k2;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x.data[i], my = mu_y.data[i];
    const double vx = xx.data[i] - mx * mx;
    const double vy = yy.data[i] - my * my;
    const double cov = xy.data[i] - mx * my;
    total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

}  // namespace endoagent::metrics
