#include <algorithm>
#include <cmath>
#include <numeric>

#include "endoagent/enhance.hpp"
#include "endoagent/error.hpp"
#include "endoagent/filters.hpp"

namespace endoagent::enhance {
namespace {

void require_not_normal(Severity s) {
  if (s == Severity::Normal) {
    throw Error(ErrorCode::InvalidArgument, "enhancement requested with severity normal");
  }
}

template <class F>
ImageBuf map_values(const ImageBuf& img, F&& f) {
  std::vector<double> out(img.data().begin(), img.data().end());
  for (double& v : out) v = f(v);
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(out));
}

}  // namespace

ImageBuf enhance_low_light(const ImageBuf& img, Severity severity, const LowLightPreset& preset) {
  require_not_normal(severity);
  if (!(preset.gamma > 0.0) || !(preset.gain > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "low-light preset needs gamma > 0 and gain > 0");
  }
  const double inv_gamma = 1.0 / preset.gamma;
  // Never darken: the inverse curve lies above identity for gain <= 1 and
  // gamma >= 1, the max guards presets outside that range.
  ImageBuf out = map_values(img, [&](double v) {
    return std::max(v, std::pow(std::min(v / preset.gain, 1.0), inv_gamma));
  });
  if (!preset.denoise) return out;
  return ImageBuf::from_planes(median3x3(out.channel(0)), median3x3(out.channel(1)),
                               median3x3(out.channel(2)));
}

ImageBuf correct_exposure(const ImageBuf& img, Severity severity, const ExposurePreset& preset) {
  require_not_normal(severity);
  if (!(preset.gain > 0.0)) throw Error(ErrorCode::InvalidArgument, "exposure gain must be > 0");
  return map_values(img, [&](double v) {
    const double lifted = v <= preset.knee ? v : preset.knee + (v - preset.knee) * preset.highlight_boost;
    return lifted / preset.gain;
  });
}

ImageBuf deblur(const ImageBuf& img, Severity severity, const DeblurPreset& preset,
                std::optional<double> angle) {
  require_not_normal(severity);
  if (preset.kernel_length < 1 || preset.iterations < 0) {
    throw Error(ErrorCode::InvalidArgument, "deblur preset needs kernel_length >= 1, iterations >= 0");
  }
  if (preset.kernel_length > std::min(img.width(), img.height())) {
    throw Error(ErrorCode::KernelExceedsImage, "deblur kernel longer than the image side");
  }
  if (preset.iterations == 0) return img;
  const Kernel2D k = bench::motion_kernel(preset.kernel_length, angle.value_or(preset.angle));
  const Kernel2D kt = k.flipped();
  constexpr double kEps = 1e-6;

  std::array<Plane, 3> est;
  for (int c = 0; c < 3; ++c) {
    const Plane observed = img.channel(c);
    Plane u = observed;
    for (int it = 0; it < preset.iterations; ++it) {
      const Plane ratio = safe_divide(observed, correlate_same(u, k), kEps);
      u = multiply(u, correlate_same(ratio, kt));
    }
    est[static_cast<std::size_t>(c)] = std::move(u);
  }
  return ImageBuf::from_planes(est[0], est[1], est[2]);
}

Plane dark_channel(const ImageBuf& img, int patch_radius) {
  Plane mins(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      mins.at(x, y) = std::min({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
    }
  }
  return patch_radius > 0 ? min_filter(mins, patch_radius) : mins;
}

double estimate_airlight(const ImageBuf& img, int patch_radius, double fraction) {
  const Plane dark = dark_channel(img, patch_radius);
  const std::size_t n = dark.size();
  const std::size_t count =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ties broken by index so the estimate is deterministic.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dark.data[a] != dark.data[b] ? dark.data[a] > dark.data[b] : a < b;
                    });
  double best = -1.0;
  const auto px = img.data();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = order[i] * 3;
    best = std::max(best, (px[p] + px[p + 1] + px[p + 2]) / 3.0);
  }
  return best;
}

Plane guided_filter(const Plane& guide, const Plane& src, int radius, double eps) {
  const Plane mean_i = box_mean(guide, radius);
  const Plane mean_p = box_mean(src, radius);
  const Plane corr_ip = box_mean(multiply(guide, src), radius);
  const Plane corr_ii = box_mean(multiply(guide, guide), radius);
  Plane a(guide.width, guide.height), b(guide.width, guide.height);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double var_i = corr_ii.data[i] - mean_i.data[i] * mean_i.data[i];
    const double cov_ip = corr_ip.data[i] - mean_i.data[i] * mean_p.data[i];
    a.data[i] = cov_ip / (var_i + eps);
    b.data[i] = mean_p.data[i] - a.data[i] * mean_i.data[i];
  }
  const Plane mean_a = box_mean(a, radius);
  const Plane mean_b = box_mean(b, radius);
  Plane out(guide.width, guide.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = mean_a.data[i] * guide.data[i] + mean_b.data[i];
  }
  return out;
}

ImageBuf desmoke(const ImageBuf& img, Severity severity, const DesmokePreset& preset) {
  if (severity != Severity::Severe) {
    throw Error(ErrorCode::SeverityUnsupported, "desmoke only supports severe");
  }
  if (preset.omega == 0.0) return img;
  const double airlight =
      std::max(estimate_airlight(img, preset.patch_radius, preset.airlight_fraction), 1e-3);

  std::vector<double> scaled(img.data().begin(), img.data().end());
  for (double& v : scaled) v = std::min(v / airlight, 1.0);
  const ImageBuf normalized(img.width(), img.height(), std::move(scaled));
  Plane t = dark_channel(normalized, preset.patch_radius);
  for (double& v : t.data) v = 1.0 - preset.omega * v;
  if (preset.refine) t = guided_filter(img.luminance(), t, preset.guide_radius, preset.guide_eps);

  std::vector<double> out(img.data().size());
  const auto px = img.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ti = std::clamp(t.data[i], preset.t_min, 1.0);
    for (int c = 0; c < 3; ++c) out[i * 3 + c] = (px[i * 3 + c] - airlight) / ti + airlight;
  }
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(out));
}

}  // namespace endoagent::enhance
