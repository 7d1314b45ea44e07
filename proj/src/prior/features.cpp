#include <algorithm>
#include <array>
#include <cmath>

#include "endoagent/filters.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/prior.hpp"

namespace endoagent::prior {
namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "mean_luma",     "luma_std",           "shadow_clip",     "highlight_clip",  "gradient_mean",
    "laplacian_var", "dark_channel_mean", "local_contrast", "saturation_mean", "entropy_bits",
    "detail_ratio",  "gradient_anisotropy",
};

constexpr int kLocalRadius = 3;
// Keeps the contrast ratio bounded on near-black regions.
constexpr double kContrastFloor = 0.05;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string_view feature_name(int index) { return kNames.at(static_cast<std::size_t>(index)); }

FeatureVector extract_features(const ImageBuf& img) {
  FeatureVector f{};
  const Plane luma = img.luminance();
  const int w = img.width(), h = img.height();
  const double n = static_cast<double>(luma.size());

  const double mu = mean_of(luma.data);
  double var = 0.0, shadow = 0.0, highlight = 0.0;
  std::array<double, 256> hist{};
  for (double v : luma.data) {
    var += (v - mu) * (v - mu);
    if (v < 0.05) shadow += 1.0;
    if (v > 0.95) highlight += 1.0;
    hist[quantize(v)] += 1.0;
  }
  f[kMeanLuma] = mu;
  f[kLumaStd] = std::sqrt(var / n);
  f[kShadowClip] = shadow / n;
  f[kHighlightClip] = highlight / n;

  double entropy_bits = 0.0;
  for (double c : hist) {
    if (c > 0.0) entropy_bits -= (c / n) * std::log2(c / n);
  }
  f[kEntropy] = entropy_bits;

  double grad = 0.0;
  if (w > 1 && h > 1) {
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) {
        const double gx = luma.at(x + 1, y) - luma.at(x, y);
        const double gy = luma.at(x, y + 1) - luma.at(x, y);
        grad += std::sqrt(gx * gx + gy * gy);
      }
    }
    grad /= static_cast<double>(w - 1) * (h - 1);
  }
  f[kGradientMean] = grad;

  if (w > 2 && h > 2) {
    const Plane smooth = box_mean(luma, 2);
    double coarse = 0.0;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) {
        const double gx = smooth.at(x + 1, y) - smooth.at(x, y);
        const double gy = smooth.at(x, y + 1) - smooth.at(x, y);
        coarse += std::sqrt(gx * gx + gy * gy);
      }
    }
    coarse /= static_cast<double>(w - 1) * (h - 1);
    f[kDetailRatio] = grad / (coarse + 1e-4);

    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        const double gx = 0.5 * (luma.at(x + 1, y) - luma.at(x - 1, y));
        const double gy = 0.5 * (luma.at(x, y + 1) - luma.at(x, y - 1));
        sxx += gx * gx;
        syy += gy * gy;
        sxy += gx * gy;
      }
    }
    const double tr = sxx + syy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - (sxx * syy - sxy * sxy)));
    const double l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
    f[kGradientAnisotropy] = l1 > 0.0 ? 1.0 - l2 / l1 : 0.0;
  }

  if (w > 2 && h > 2) {
    std::vector<double> lap;
    lap.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        lap.push_back(luma.at(x - 1, y) + luma.at(x + 1, y) + luma.at(x, y - 1) +
                      luma.at(x, y + 1) - 4.0 * luma.at(x, y));
      }
    }
    const double m = mean_of(lap);
    double s = 0.0;
    for (double v : lap) s += (v - m) * (v - m);
    f[kLaplacianVar] = s / static_cast<double>(lap.size());
  }

  Plane dark(w, h);
  double sat = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
      const double hi = std::max({r, g, b}), lo = std::min({r, g, b});
      dark.at(x, y) = lo;
      if (hi > 1e-6) sat += (hi - lo) / hi;
    }
  }
  f[kSaturationMean] = sat / n;
  f[kDarkChannelMean] = mean_of(min_filter(dark, kLocalRadius).data);

  Plane sq(w, h);
  for (std::size_t i = 0; i < luma.size(); ++i) sq.data[i] = luma.data[i] * luma.data[i];
  const Plane m1 = box_mean(luma, kLocalRadius);
  const Plane m2 = box_mean(sq, kLocalRadius);
  double contrast = 0.0;
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const double sd = std::sqrt(std::max(0.0, m2.data[i] - m1.data[i] * m1.data[i]));
    contrast += sd / (m1.data[i] + kContrastFloor);
  }
  f[kLocalContrast] = contrast / n;
  return f;
}

FeatureVector compress_features(const FeatureVector& f) {
  FeatureVector out = f;
  out[kLumaStd] = std::log(f[kLumaStd] + 1e-3);
  out[kGradientMean] = std::log(f[kGradientMean] + 1e-3);
  out[kLaplacianVar] = std::log(f[kLaplacianVar] + 1e-6);
  return out;
}

}  // namespace endoagent::prior
