#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "endoagent/filters.hpp"
#include "endoagent/image.hpp"
#include "endoagent/label.hpp"
#include "endoagent/manifest.hpp"

namespace endoagent::bench {

using Rng = std::mt19937_64;

template <class T>
struct Tiered {
  T mild;
  T severe;
  /// Throws SeverityUnsupported for Normal.
  const T& at(Severity s) const;
};

struct LowLightParams {
  double gamma = 1.8;
  double gain = 0.7;
  double noise_sigma = 0.01;
};

struct OverExposureParams {
  double gain = 1.5;
  /// Hard clip at 1.0; otherwise a smooth shoulder compresses values above 0.8.
  bool clip = true;
};

struct MotionBlurParams {
  int kernel_length = 7;
  /// Degrees counter-clockwise from +x. Unset means "draw uniformly in
  /// [0, 180) per image".
  std::optional<double> angle;
};

struct SmokeParams {
  double airlight = 0.8;
  double beta = 1.2;
  int noise_octaves = 4;
};

struct SynthesisParams {
  Tiered<LowLightParams> low_light{{1.8, 0.7, 0.01}, {2.8, 0.4, 0.03}};
  Tiered<OverExposureParams> over_exposure{{1.5, true}, {2.2, true}};
  Tiered<MotionBlurParams> motion_blur{{7, std::nullopt}, {17, std::nullopt}};
  SmokeParams smoke{};

  /// Throws InvariantViolation when a severe tier does not dominate its mild
  /// tier or a value is out of its domain.
  void validate() const;
};

/// Concrete parameters a composite synthesis actually used; written to the
/// per-entry sidecar so enhancement can be evaluated with the true kernel.
struct AppliedSynthesis {
  DistortionLabel label;
  std::optional<LowLightParams> low_light;
  std::optional<OverExposureParams> over_exposure;
  std::optional<MotionBlurParams> motion_blur;
  std::optional<SmokeParams> smoke;
};

ImageBuf synth_low_light(const ImageBuf& img, Severity severity, const SynthesisParams& params,
                         Rng& rng);
ImageBuf synth_over_exposure(const ImageBuf& img, Severity severity,
                             const SynthesisParams& params, Rng& rng);
/// The angle must be resolved (set) in the selected tier.
ImageBuf synth_motion_blur(const ImageBuf& img, Severity severity, const SynthesisParams& params);
ImageBuf synth_smoke(const ImageBuf& img, Severity severity, const SynthesisParams& params,
                     Rng& rng);

/// Normalized linear motion kernel; odd square support of length (+1 if even).
Kernel2D motion_kernel(int length, double angle_deg);
/// Smoothed multi-octave value noise rescaled to [0,1]. Consumes rng.
Plane smoke_depth_field(int width, int height, int octaves, Rng& rng);

/// Applies the label's distortions in order Smoke, MotionBlur, then exposure.
/// An unset blur angle is drawn from rng before any other draw.
ImageBuf compose_distortions(const ImageBuf& img, const DistortionLabel& label,
                             const SynthesisParams& params, Rng& rng,
                             AppliedSynthesis* applied = nullptr);

nlohmann::json to_json(const SynthesisParams& p);
SynthesisParams synthesis_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AppliedSynthesis& a);
AppliedSynthesis applied_from_json(const nlohmann::json& j);

/// Sidecar file for a distorted image: same stem, .json extension.
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);
std::optional<AppliedSynthesis> read_sidecar(const std::filesystem::path& image_path);

enum class Order { Normal, Single, Second, Third };

struct BenchmarkConfig {
  std::filesystem::path source_manifest;
  std::uint64_t seed = 7;
  /// Per order: total count spread round-robin over that order's allowed labels.
  std::map<Order, int> counts;
  /// Explicit per-label counts (canonical label string -> count), added after
  /// the per-order cells.
  std::map<std::string, int> label_counts;
  /// Category sets permitted for composites; empty means all valid sets.
  std::vector<std::vector<Category>> allowed_composites;
  double test_fraction = 0.0;
  SynthesisParams params{};
  std::string image_extension = ".png";

  static BenchmarkConfig from_json(const nlohmann::json& j);
};

/// One planned benchmark entry, before any pixels are produced.
struct PlannedEntry {
  std::string id;
  DistortionLabel label;
  std::size_t source_index;
  Split split;
  std::uint64_t seed;
};

/// Labels for each order after allowed_composites filtering, canonical order.
std::vector<DistortionLabel> labels_for_order(Order order,
                                              const std::vector<std::vector<Category>>& allowed);

/// Deterministic entry plan. Throws InsufficientSourceImages when the source
/// pool is smaller than the requested total.
std::vector<PlannedEntry> plan_benchmark(const BenchmarkConfig& config, std::size_t source_count);

/// Synthesizes every planned entry into out_dir (images plus sidecars) and
/// writes out_dir/manifest.json. Returns the manifest.
DatasetManifest build_benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir);

/// Procedural endoscopy-like clean scene: shaded tissue with vessels,
/// organ blobs, an optional instrument and specular glints.
ImageBuf make_scene(int width, int height, std::uint64_t seed);

/// Writes `count` scenes plus a manifest (label "normal", split train) to
/// out_dir/manifest.json and returns it.
DatasetManifest generate_scene_corpus(const std::filesystem::path& out_dir, int count, int width,
                                      int height, std::uint64_t seed);

/// Per-entry generator: independent of iteration order.
Rng entry_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace endoagent::bench
