#pragma once

#include <array>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string_view>
#include <vector>

#include "endoagent/image.hpp"
#include "endoagent/label.hpp"
#include "endoagent/manifest.hpp"

namespace endoagent::prior {

inline constexpr int kFeatureCount = 12;
inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr double kDefaultTemperature = 1.1;

using FeatureVector = std::array<double, kFeatureCount>;

enum Feature {
  kMeanLuma = 0,
  kLumaStd,
  kShadowClip,
  kHighlightClip,
  kGradientMean,
  kLaplacianVar,
  kDarkChannelMean,
  kLocalContrast,
  kSaturationMean,
  kEntropy,
  /// Mean gradient over the gradient of a 5x5 box-smoothed copy; drops when
  /// fine detail is lost, independent of global gain or veiling.
  kDetailRatio,
  /// 1 - lambda_min/lambda_max of the global gradient structure tensor.
  kGradientAnisotropy,
};

std::string_view feature_name(int index);

FeatureVector extract_features(const ImageBuf& img);

/// Fixed monotone transform applied before standardization: log(x + eps) on
/// luma std, gradient mean and Laplacian variance.
FeatureVector compress_features(const FeatureVector& f);

/// Temperature softmax with max-subtraction. Throws InvalidTemperature for
/// T <= 0 or non-finite T.
std::vector<double> softmax_t(std::span<const double> logits, double temperature);
/// Shannon entropy in nats.
double entropy(std::span<const double> p);

/// Two-class affine head: logits = W z + b on standardized features z.
struct LogisticHead {
  std::array<FeatureVector, 2> weights{};
  std::array<double, 2> bias{};

  std::array<double, 2> logits(const FeatureVector& z) const;
};

struct PriorModel {
  FeatureVector feature_means{};
  FeatureVector feature_stds{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  /// Indexed by index_of(Category); classes are (absent, present).
  std::array<LogisticHead, kCategoryCount> presence{};
  /// Indexed by index_of(Category); classes are (mild, severe).
  std::array<LogisticHead, kCategoryCount> severity{};
  double temperature = kDefaultTemperature;

  /// Log-compresses the heavy-tailed scale features, then z-scores.
  FeatureVector standardize(const FeatureVector& f) const;
};

struct CategoryBelief {
  std::array<double, 2> presence{0.5, 0.5};
  std::array<double, 2> severity{0.5, 0.5};

  double p_present() const { return presence[1]; }
};

struct SoftLabels {
  std::array<CategoryBelief, kCategoryCount> categories{};

  const CategoryBelief& at(Category c) const { return categories[index_of(c)]; }
  CategoryBelief& at(Category c) { return categories[index_of(c)]; }
};

struct TrainHyper {
  double learning_rate = 0.1;
  int epochs = 2000;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// Mean cross-entropy of a head over standardized samples plus
/// 0.5 * l2 * |W|^2 (bias unregularized). Writes the gradient when requested.
double head_loss(const LogisticHead& head, std::span<const FeatureVector> z,
                 std::span<const int> y, double l2, LogisticHead* grad = nullptr);

/// Fits a model from precomputed features. `loss_curve`, when given, receives
/// the summed training loss over all heads before each epoch and after the last.
/// Throws DegenerateData when a category lacks a presence class, NonFiniteLoss
/// when the loss diverges.
PriorModel train_prior(std::span<const FeatureVector> features,
                       std::span<const DistortionLabel> labels, const TrainHyper& hyper,
                       std::vector<double>* loss_curve = nullptr);

/// Loads and featurizes every train-split entry of the manifest.
PriorModel train_prior(const DatasetManifest& manifest, const TrainHyper& hyper,
                       std::vector<double>* loss_curve = nullptr);

SoftLabels prior_distributions(const PriorModel& model, const FeatureVector& features);
SoftLabels prior_distributions(const PriorModel& model, const ImageBuf& img);

/// Presence iff p_present > threshold. Smoke is forced to Severe; when both
/// illumination categories pass, the larger p_present wins (LowLight on ties).
DistortionLabel hard_label(const SoftLabels& soft, double presence_threshold = 0.5);

nlohmann::json to_json(const PriorModel& model);
PriorModel model_from_json(const nlohmann::json& j);
void save_model(const PriorModel& model, const std::filesystem::path& path);
PriorModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const SoftLabels& soft);

}  // namespace endoagent::prior
