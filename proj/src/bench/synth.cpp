#include <algorithm>
#include <cmath>
#include <numbers>

#include "endoagent/bench.hpp"
#include "endoagent/error.hpp"

namespace endoagent::bench {

template <class T>
const T& Tiered<T>::at(Severity s) const {
  switch (s) {
    case Severity::Mild: return mild;
    case Severity::Severe: return severe;
    case Severity::Normal: break;
  }
  throw Error(ErrorCode::SeverityUnsupported, "no parameters for severity normal");
}

template struct Tiered<LowLightParams>;
template struct Tiered<OverExposureParams>;
template struct Tiered<MotionBlurParams>;

void SynthesisParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvariantViolation, what);
  };
  for (const auto* p : {&low_light.mild, &low_light.severe}) {
    require(p->gamma > 1.0, "low_light gamma must exceed 1");
    require(p->gain > 0.0 && p->gain <= 1.0, "low_light gain must lie in (0,1]");
    require(p->noise_sigma >= 0.0, "low_light noise_sigma must be nonnegative");
  }
  require(low_light.severe.gamma > low_light.mild.gamma, "severe low_light gamma must dominate");
  for (const auto* p : {&over_exposure.mild, &over_exposure.severe}) {
    require(p->gain > 1.0, "over_exposure gain must exceed 1");
  }
  require(over_exposure.severe.gain > over_exposure.mild.gain,
          "severe over_exposure gain must dominate");
  for (const auto* p : {&motion_blur.mild, &motion_blur.severe}) {
    require(p->kernel_length >= 1, "motion_blur kernel_length must be >= 1");
  }
  require(motion_blur.severe.kernel_length > motion_blur.mild.kernel_length,
          "severe motion_blur kernel_length must dominate");
  require(smoke.beta >= 0.0, "smoke beta must be nonnegative");
  require(smoke.airlight >= 0.0 && smoke.airlight <= 1.0, "smoke airlight must lie in [0,1]");
  require(smoke.noise_octaves >= 1, "smoke noise_octaves must be >= 1");
}

namespace {

void require_not_normal(Severity s) {
  if (s == Severity::Normal) {
    throw Error(ErrorCode::InvalidArgument, "synthesis requested with severity normal");
  }
}

template <class F>
ImageBuf map_values(const ImageBuf& img, F&& f) {
  std::vector<double> out(img.data().begin(), img.data().end());
  for (double& v : out) v = f(v);
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(out));
}

}  // namespace

ImageBuf synth_low_light(const ImageBuf& img, Severity severity, const SynthesisParams& params,
                         Rng& rng) {
  require_not_normal(severity);
  const auto& p = params.low_light.at(severity);
  std::vector<double> out(img.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(p.gain * std::pow(img.data()[i], p.gamma), 0.0, 1.0);
  }
  if (p.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, p.noise_sigma);
    for (double& v : out) v += noise(rng);
  }
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(out));
}

ImageBuf synth_over_exposure(const ImageBuf& img, Severity severity,
                             const SynthesisParams& params, Rng& /*rng*/) {
  require_not_normal(severity);
  const auto& p = params.over_exposure.at(severity);
  if (p.clip) return map_values(img, [g = p.gain](double v) { return g * v; });
  return map_values(img, [g = p.gain](double v) {
    const double y = g * v;
    constexpr double knee = 0.8;
    constexpr double room = 1.0 - knee;
    return y <= knee ? y : knee + room * (1.0 - std::exp(-(y - knee) / room));
  });
}

Kernel2D motion_kernel(int length, double angle_deg) {
  if (length < 1) throw Error(ErrorCode::InvalidArgument, "motion kernel length must be >= 1");
  const int size = length % 2 == 1 ? length : length + 1;
  Kernel2D k{size, size, std::vector<double>(static_cast<std::size_t>(size) * size, 0.0)};
  const double c = (size - 1) / 2.0;
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(rad);
  const double dy = -std::sin(rad);
  // One sample per unit length, bilinearly splatted. At 0 degrees every
  // sample lands on a grid point, giving exactly 1/length per tap.
  for (int i = 0; i < length; ++i) {
    const double t = i - (length - 1) / 2.0;
    double x = c + t * dx;
    double y = c + t * dy;
    if (std::abs(x - std::round(x)) < 1e-9) x = std::round(x);
    if (std::abs(y - std::round(y)) < 1e-9) y = std::round(y);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int j = 0; j < 4; ++j) {
      if (w[j] == 0.0) continue;
      const int xi = std::clamp(xs[j], 0, size - 1);
      const int yi = std::clamp(ys[j], 0, size - 1);
      k.taps[static_cast<std::size_t>(yi) * size + xi] += w[j];
    }
  }
  const double total = k.sum();
  for (double& t : k.taps) t /= total;
  return k;
}

ImageBuf synth_motion_blur(const ImageBuf& img, Severity severity, const SynthesisParams& params) {
  require_not_normal(severity);
  const auto& p = params.motion_blur.at(severity);
  if (p.kernel_length < 1) throw Error(ErrorCode::InvalidArgument, "kernel_length must be >= 1");
  if (p.kernel_length > std::min(img.width(), img.height())) {
    throw Error(ErrorCode::KernelExceedsImage, "blur kernel longer than the image side");
  }
  if (!p.angle) throw Error(ErrorCode::InvalidArgument, "blur angle must be resolved");
  const Kernel2D kernel = motion_kernel(p.kernel_length, *p.angle);
  return ImageBuf::from_planes(correlate_same(img.channel(0), kernel),
                               correlate_same(img.channel(1), kernel),
                               correlate_same(img.channel(2), kernel));
}

Plane smoke_depth_field(int width, int height, int octaves, Rng& rng) {
  Plane field(width, height, 0.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double amplitude = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const int cells = 2 << o;
    std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& g : grid) g = uni(rng);
    for (int y = 0; y < height; ++y) {
      const double gy = (height > 1 ? static_cast<double>(y) / (height - 1) : 0.0) * cells;
      const int y0 = std::min(static_cast<int>(gy), cells - 1);
      double ty = gy - y0;
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (int x = 0; x < width; ++x) {
        const double gx = (width > 1 ? static_cast<double>(x) / (width - 1) : 0.0) * cells;
        const int x0 = std::min(static_cast<int>(gx), cells - 1);
        double tx = gx - x0;
        tx = tx * tx * (3.0 - 2.0 * tx);
        auto g = [&](int xi, int yi) { return grid[static_cast<std::size_t>(yi) * (cells + 1) + xi]; };
        const double top = g(x0, y0) * (1 - tx) + g(x0 + 1, y0) * tx;
        const double bottom = g(x0, y0 + 1) * (1 - tx) + g(x0 + 1, y0 + 1) * tx;
        field.at(x, y) += amplitude * (top * (1 - ty) + bottom * ty);
      }
    }
    amplitude *= 0.5;
  }
  const auto [lo, hi] = std::minmax_element(field.data.begin(), field.data.end());
  const double min = *lo;
  const double span = *hi - *lo;
  for (double& v : field.data) v = span > 0.0 ? (v - min) / span : 0.0;
  return field;
}

ImageBuf synth_smoke(const ImageBuf& img, Severity severity, const SynthesisParams& params,
                     Rng& rng) {
  if (severity != Severity::Severe) {
    throw Error(ErrorCode::SeverityUnsupported, "smoke is only synthesized at severe");
  }
  const auto& p = params.smoke;
  const Plane depth = smoke_depth_field(img.width(), img.height(), p.noise_octaves, rng);
  std::vector<double> out(img.data().size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double t = std::exp(-p.beta * depth.data[i]);
    for (int c = 0; c < 3; ++c) {
      out[i * 3 + c] = img.data()[i * 3 + c] * t + p.airlight * (1.0 - t);
    }
  }
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(out));
}

ImageBuf compose_distortions(const ImageBuf& img, const DistortionLabel& label,
                             const SynthesisParams& params, Rng& rng, AppliedSynthesis* applied) {
  SynthesisParams resolved = params;
  if (applied != nullptr) *applied = AppliedSynthesis{label, {}, {}, {}, {}};
  if (label.empty()) return img;

  if (const Severity s = label.severity_of(Category::MotionBlur); s != Severity::Normal) {
    auto& tier = s == Severity::Mild ? resolved.motion_blur.mild : resolved.motion_blur.severe;
    if (!tier.angle) tier.angle = std::uniform_real_distribution<double>(0.0, 180.0)(rng);
  }

  ImageBuf out = img;
  for (const auto& e : label.entries()) {
    switch (e.category) {
      case Category::Smoke:
        out = synth_smoke(out, e.severity, resolved, rng);
        if (applied) applied->smoke = resolved.smoke;
        break;
      case Category::MotionBlur:
        out = synth_motion_blur(out, e.severity, resolved);
        if (applied) applied->motion_blur = resolved.motion_blur.at(e.severity);
        break;
      case Category::OverExposure:
        out = synth_over_exposure(out, e.severity, resolved, rng);
        if (applied) applied->over_exposure = resolved.over_exposure.at(e.severity);
        break;
      case Category::LowLight:
        out = synth_low_light(out, e.severity, resolved, rng);
        if (applied) applied->low_light = resolved.low_light.at(e.severity);
        break;
    }
  }
  return out;
}

}  // namespace endoagent::bench
