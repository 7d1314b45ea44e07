#pragma once

#include <array>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endoagent/image.hpp"
#include "endoagent/label.hpp"

namespace endoagent::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all channels, peak 1. Zero MSE returns kPsnrCap.
/// Throws DimensionMismatch.
double psnr(const ImageBuf& ref, const ImageBuf& test);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over valid window positions on BT.601 luma.
/// Throws DimensionMismatch, TooSmall.
double ssim(const ImageBuf& ref, const ImageBuf& test, const SsimParams& params = {});

// Natural-scene statistics shared by NIQE and BRISQUE.

inline constexpr int kNssFeatures = 36;
inline constexpr int kNssPerScale = 18;
using NssVector = std::array<double, kNssFeatures>;

/// Mean-subtracted contrast-normalized coefficients of a 0..255 luma plane,
/// 7x7 Gaussian (sigma 7/6) local statistics, stabilizing constant 1.
Plane mscn(const Plane& luma255, Plane* local_sigma = nullptr);

struct GgdFit {
  double alpha;
  double variance;
};
struct AggdFit {
  double alpha;
  double mean;
  double left_variance;
  double right_variance;
};
GgdFit fit_ggd(std::span<const double> x);
AggdFit fit_aggd(std::span<const double> x);

/// 18 features of one scale: GGD (alpha, variance) of the MSCN field, then
/// AGGD (alpha, mean, left var, right var) of the H, V, D1, D2 neighbour
/// products. `x0, y0, w, h` select a block of the MSCN field.
std::array<double, kNssPerScale> nss_block_features(const Plane& mscn_field, int x0, int y0, int w,
                                                   int h);

/// 2x2 area average; odd trailing rows/columns are dropped.
Plane half_scale(const Plane& p);

struct NiqeParams {
  int patch_size = 32;
  /// Fraction of the sharpest patch's sharpness a pristine patch must reach.
  double sharpness_threshold = 0.75;
  double regularization = 1e-6;
};

struct NiqeModel {
  NiqeParams params;
  std::vector<double> mean;        // 36
  std::vector<double> covariance;  // 36x36 row-major, regularized

  nlohmann::json to_json() const;
  static NiqeModel from_json(const nlohmann::json& j);
};

/// Per-patch 36-vectors (full-scale 18 then half-scale 18). With
/// `select_sharp`, only patches passing the sharpness threshold are kept.
std::vector<NssVector> niqe_patch_features(const ImageBuf& img, const NiqeParams& params,
                                           bool select_sharp);

/// Throws InsufficientCorpus below 20 images.
NiqeModel fit_niqe(std::span<const ImageBuf> pristine, const NiqeParams& params = {});
/// sqrt((mu_p - mu_d)^T ((S_p + S_d) / 2)^-1 (mu_p - mu_d)). Throws TooSmall
/// when the image holds fewer than two patches.
double niqe(const NiqeModel& model, const ImageBuf& img);

/// Whole-image NSS features at full (0..17) and half (18..35) scale.
/// Throws TooSmall below 32x32.
NssVector brisque_features(const ImageBuf& img);

/// Ridge regressor from standardized BRISQUE features to a distortion-burden
/// score (see brisque_target); lower is better.
struct BrisqueModel {
  NssVector means{};
  NssVector stds{};
  NssVector weights{};
  double bias = 0.0;
  double lambda = 1.0;

  double score(const NssVector& features) const;
  nlohmann::json to_json() const;
  static BrisqueModel from_json(const nlohmann::json& j);
};

/// 0 for clean, +25 per mild entry and +50 per severe entry.
double brisque_target(const DistortionLabel& label);
BrisqueModel fit_brisque(std::span<const NssVector> features, std::span<const double> targets,
                         double lambda = 1.0);
double brisque(const BrisqueModel& model, const ImageBuf& img);

// Classification accuracy in the layout of a severity x category grid.

enum class AccuracyMode { SeverityOnly, CategoryOnly, Joint };
std::string_view to_string(AccuracyMode m) noexcept;

inline constexpr int kGridColumns = 7;
/// Mild Low/Over/Blur, then Severe Low/Over/Blur/Smoke.
std::array<LabelEntry, kGridColumns> grid_columns();
std::string_view grid_column_name(int i);

struct LabelPair {
  /// nullopt marks a failed prediction; it counts as incorrect everywhere.
  std::optional<DistortionLabel> predicted;
  DistortionLabel truth;
};

bool is_correct(const std::optional<DistortionLabel>& predicted, const DistortionLabel& truth,
                AccuracyMode mode);

struct AccuracyRow {
  AccuracyMode mode;
  std::array<std::optional<double>, kGridColumns> cells{};
  std::array<int, kGridColumns> counts{};
  /// Mean of the populated cells.
  std::optional<double> average;
  /// Fraction of all images (normal ones included) judged correct.
  double overall = 0.0;
};

struct AccuracyReport {
  std::size_t n_images = 0;
  std::array<AccuracyRow, 3> rows{};

  const AccuracyRow& row(AccuracyMode m) const { return rows[static_cast<std::size_t>(m)]; }
};

/// Cell (c, s) covers images whose ground truth contains (c, s); an image is
/// correct when its whole label satisfies the row's criterion. Throws EmptyInput.
AccuracyRow accuracy_row(std::span<const LabelPair> pairs, AccuracyMode mode);
AccuracyReport accuracy_report(std::span<const LabelPair> pairs);

/// Deep-feature metrics (LPIPS, CLIPIQA+) live outside this library; a scorer
/// maps an image to one scalar.
class ExternalScorer {
 public:
  virtual ~ExternalScorer() = default;
  virtual std::string name() const = 0;
  virtual double score(const ImageBuf& img, const ImageBuf* reference) = 0;
};

/// Writes the image (and reference) to temporary PNGs and runs
/// `command <image> [<reference>]`, parsing the first number on stdout.
class SubprocessScorer : public ExternalScorer {
 public:
  SubprocessScorer(std::string name, std::string command, std::filesystem::path scratch_dir);
  std::string name() const override { return name_; }
  double score(const ImageBuf& img, const ImageBuf* reference) override;

 private:
  std::string name_;
  std::string command_;
  std::filesystem::path scratch_;
};

}  // namespace endoagent::metrics
