#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "endoagent/prior.hpp"

namespace endoagent::testing {

using namespace endoagent::prior;

// Separable toy set in feature space. Presence of each category is carried
// by one uncompressed feature and severity by another; mean luma is the
// low-light presence feature, so "dark" means LowLight.
struct Toy {
  std::vector<FeatureVector> features;
  std::vector<DistortionLabel> labels;
};

inline constexpr int kPresenceFeature[kCategoryCount] = {kDarkChannelMean, kDetailRatio, kHighlightClip, kMeanLuma};
inline constexpr int kSeverityFeature[kCategoryCount] = {kLocalContrast, kGradientAnisotropy, kSaturationMean, kEntropy};

inline FeatureVector toy_features(const DistortionLabel& l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  FeatureVector f{};
  for (double& v : f) v = 0.5 + jitter(rng);
  for (Category c : kCategories) {
    const Severity s = l.severity_of(c);
    const bool present = s != Severity::Normal;
    // Mean luma runs the other way: dark images carry low light.
    const bool high = c == Category::LowLight ? !present : present;
    f[kPresenceFeature[index_of(c)]] = (high ? 0.8 : 0.2) + jitter(rng);
    f[kSeverityFeature[index_of(c)]] = (s == Severity::Severe ? 0.8 : 0.2) + jitter(rng);
  }
  f[kLumaStd] = 0.2 + 0.1 * jitter(rng);
  f[kGradientMean] = 0.05 + 0.01 * jitter(rng);
  f[kLaplacianVar] = 0.01;
  return f;
}

inline Toy make_toy(std::uint64_t seed, int copies = 4) {
  std::mt19937_64 rng(seed);
  Toy t;
  for (int r = 0; r < copies; ++r) {
    for (const auto& l : enumerate_valid_labels()) {
      t.features.push_back(toy_features(l, rng));
      t.labels.push_back(l);
    }
  }
  return t;
}

inline double numeric_partial(const LogisticHead& h, std::span<const FeatureVector> z, std::span<const int> y,
                       double l2, double* param) {
  const double eps = 1e-6, saved = *param;
  *param = saved + eps;
  const double up = head_loss(h, z, y, l2);
  *param = saved - eps;
  const double down = head_loss(h, z, y, l2);
  *param = saved;
  return (up - down) / (2 * eps);
}

}  // namespace endoagent::testing
