#pragma once

#include <filesystem>
#include <map>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "endoagent/bench.hpp"
#include "endoagent/image.hpp"
#include "endoagent/label.hpp"

namespace endoagent::enhance {

/// Inverse of gain * in^gamma: out = (in / gain)^(1/gamma).
struct LowLightPreset {
  double gamma = 1.8;
  double gain = 0.7;
  /// 3x3 median after brightening; on by default for the severe tier.
  bool denoise = false;
};

/// out = in / gain below `knee`; above it, (knee + (in - knee) * highlight_boost) / gain
/// so clipped highlights are lifted toward their likely pre-clip value.
struct ExposurePreset {
  double gain = 1.5;
  double knee = 0.9;
  double highlight_boost = 2.0;
};

/// Richardson-Lucy with a linear motion kernel.
struct DeblurPreset {
  int kernel_length = 7;
  /// Used when no per-image angle is known.
  double angle = 0.0;
  int iterations = 40;
};

/// Dark-channel-prior dehazing.
struct DesmokePreset {
  double omega = 0.95;
  double t_min = 0.1;
  int patch_radius = 7;
  /// Fraction of brightest dark-channel pixels used for the airlight estimate.
  double airlight_fraction = 0.001;
  /// Guided-filter refinement of the transmission map.
  bool refine = true;
  int guide_radius = 8;
  double guide_eps = 1e-3;
};

ImageBuf enhance_low_light(const ImageBuf& img, Severity severity, const LowLightPreset& preset);
ImageBuf correct_exposure(const ImageBuf& img, Severity severity, const ExposurePreset& preset);
/// `angle` overrides the preset angle (true kernel from synthesis metadata).
/// Throws KernelExceedsImage.
ImageBuf deblur(const ImageBuf& img, Severity severity, const DeblurPreset& preset,
                std::optional<double> angle = std::nullopt);
/// Throws SeverityUnsupported for anything but Severe.
ImageBuf desmoke(const ImageBuf& img, Severity severity, const DesmokePreset& preset);

/// Scalar airlight: the mean RGB of the pixel with the largest intensity
/// among the brightest `fraction` of the dark channel.
double estimate_airlight(const ImageBuf& img, int patch_radius, double fraction);
/// Min over channels, then min over a (2r+1)^2 patch.
Plane dark_channel(const ImageBuf& img, int patch_radius);
/// He et al. guided filter of `src` with guide `guide`.
Plane guided_filter(const Plane& guide, const Plane& src, int radius, double eps);

enum class Operator { LowLight, Exposure, Deblur, Desmoke };

std::string_view to_token(Operator op) noexcept;
Operator operator_for(Category c) noexcept;

struct EnhancerSpec {
  std::string id;
  Operator op = Operator::LowLight;
  /// Operator-specific preset object; missing keys take the struct defaults.
  nlohmann::json preset = nlohmann::json::object();
};

/// Maps (category, severity) to an enhancer. Valid registries cover every
/// pair except (Smoke, Mild) and have unique ids.
class EnhancerRegistry {
 public:
  using Key = std::pair<Category, Severity>;

  static EnhancerRegistry defaults();
  static EnhancerRegistry from_json(const nlohmann::json& j);
  static EnhancerRegistry load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void set(Category c, Severity s, EnhancerSpec spec);
  const EnhancerSpec* find(Category c, Severity s) const;
  const std::map<Key, EnhancerSpec>& entries() const { return entries_; }
  /// Throws InvariantViolation for coverage gaps or duplicate ids.
  void validate() const;

 private:
  std::map<Key, EnhancerSpec> entries_;
};

struct PlanStep {
  std::string enhancer_id;
  Category category = Category::Smoke;
  Severity severity = Severity::Severe;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct EnhancementPlan {
  std::vector<PlanStep> steps;

  bool empty() const { return steps.empty(); }
  friend bool operator==(const EnhancementPlan&, const EnhancementPlan&) = default;
};

struct StepRecord {
  std::string enhancer_id;
  nlohmann::json params;
  std::string input_hash;
  std::string output_hash;
};

struct PlanResult {
  ImageBuf image;
  std::vector<StepRecord> provenance;
};

/// Runs one registry enhancer. Metadata supplies the true blur angle.
ImageBuf run_enhancer(const ImageBuf& img, const EnhancerSpec& spec, Severity severity,
                      const bench::AppliedSynthesis* metadata = nullptr,
                      nlohmann::json* resolved_params = nullptr);

/// Threads the image through every step in order. Throws NoModelForLabel
/// when a step's (category, severity) is missing or its id disagrees.
PlanResult apply_plan(const ImageBuf& img, const EnhancementPlan& plan,
                      const EnhancerRegistry& registry,
                      const bench::AppliedSynthesis* metadata = nullptr);

nlohmann::json to_json(const EnhancementPlan& plan);
nlohmann::json to_json(const StepRecord& record);

}  // namespace endoagent::enhance
