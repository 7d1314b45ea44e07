#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "endoagent/bench.hpp"
#include "endoagent/error.hpp"
#include "endoagent/image_io.hpp"

namespace endoagent::bench {

using nlohmann::json;

namespace {

json tier_json(const LowLightParams& p) {
  return {{"gamma", p.gamma}, {"gain", p.gain}, {"noise_sigma", p.noise_sigma}};
}
json tier_json(const OverExposureParams& p) { return {{"gain", p.gain}, {"clip", p.clip}}; }
json tier_json(const MotionBlurParams& p) {
  return {{"kernel_length", p.kernel_length}, {"angle", p.angle ? json(*p.angle) : json(nullptr)}};
}
json tier_json(const SmokeParams& p) {
  return {{"airlight", p.airlight}, {"beta", p.beta}, {"noise_octaves", p.noise_octaves}};
}

void read_tier(const json& j, LowLightParams& p) {
  p.gamma = j.value("gamma", p.gamma);
  p.gain = j.value("gain", p.gain);
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
}
void read_tier(const json& j, OverExposureParams& p) {
  p.gain = j.value("gain", p.gain);
  p.clip = j.value("clip", p.clip);
}
void read_tier(const json& j, MotionBlurParams& p) {
  p.kernel_length = j.value("kernel_length", p.kernel_length);
  if (j.contains("angle")) {
    p.angle = j.at("angle").is_null() ? std::nullopt : std::optional<double>(j.at("angle").get<double>());
  }
}
void read_tier(const json& j, SmokeParams& p) {
  p.airlight = j.value("airlight", p.airlight);
  p.beta = j.value("beta", p.beta);
  p.noise_octaves = j.value("noise_octaves", p.noise_octaves);
}

template <class T>
void read_tiered(const json& j, const char* key, Tiered<T>& t) {
  if (!j.contains(key)) return;
  const auto& node = j.at(key);
  if (node.contains("mild")) read_tier(node.at("mild"), t.mild);
  if (node.contains("severe")) read_tier(node.at("severe"), t.severe);
}

std::optional<Order> parse_order(const std::string& s) {
  if (s == "normal") return Order::Normal;
  if (s == "single") return Order::Single;
  if (s == "second") return Order::Second;
  if (s == "third") return Order::Third;
  return std::nullopt;
}

std::size_t order_size(Order o) {
  switch (o) {
    case Order::Normal: return 0;
    case Order::Single: return 1;
    case Order::Second: return 2;
    case Order::Third: return 3;
  }
  return 0;
}

}  // namespace

json to_json(const SynthesisParams& p) {
  return {{"low_light", {{"mild", tier_json(p.low_light.mild)}, {"severe", tier_json(p.low_light.severe)}}},
          {"over_exposure",
           {{"mild", tier_json(p.over_exposure.mild)}, {"severe", tier_json(p.over_exposure.severe)}}},
          {"motion_blur",
           {{"mild", tier_json(p.motion_blur.mild)}, {"severe", tier_json(p.motion_blur.severe)}}},
          {"smoke", tier_json(p.smoke)}};
}

SynthesisParams synthesis_params_from_json(const json& j) {
  SynthesisParams p;
  try {
    read_tiered(j, "low_light", p.low_light);
    read_tiered(j, "over_exposure", p.over_exposure);
    read_tiered(j, "motion_blur", p.motion_blur);
    if (j.contains("smoke")) read_tier(j.at("smoke"), p.smoke);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("synthesis params: ") + ex.what());
  }
  p.validate();
  return p;
}

json to_json(const AppliedSynthesis& a) {
  json j = {{"label", a.label.encode()}};
  if (a.low_light) j["low_light"] = tier_json(*a.low_light);
  if (a.over_exposure) j["over_exposure"] = tier_json(*a.over_exposure);
  if (a.motion_blur) j["motion_blur"] = tier_json(*a.motion_blur);
  if (a.smoke) j["smoke"] = tier_json(*a.smoke);
  return j;
}

AppliedSynthesis applied_from_json(const json& j) {
  AppliedSynthesis a;
  try {
    a.label = DistortionLabel::decode(j.at("label").get<std::string>());
    if (j.contains("low_light")) read_tier(j.at("low_light"), a.low_light.emplace());
    if (j.contains("over_exposure")) read_tier(j.at("over_exposure"), a.over_exposure.emplace());
    if (j.contains("motion_blur")) read_tier(j.at("motion_blur"), a.motion_blur.emplace());
    if (j.contains("smoke")) read_tier(j.at("smoke"), a.smoke.emplace());
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("sidecar: ") + ex.what());
  }
  return a;
}

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  auto p = image_path;
  p.replace_extension(".json");
  return p;
}

std::optional<AppliedSynthesis> read_sidecar(const std::filesystem::path& image_path) {
  const auto path = sidecar_path(image_path);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
  return applied_from_json(j.contains("applied") ? j.at("applied") : j);
}

BenchmarkConfig BenchmarkConfig::from_json(const json& j) {
  BenchmarkConfig c;
  try {
    if (j.contains("source_manifest")) c.source_manifest = j.at("source_manifest").get<std::string>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("counts")) {
      for (const auto& [key, value] : j.at("counts").items()) {
        const auto order = parse_order(key);
        if (!order) throw Error(ErrorCode::ParseError, "unknown order " + key);
        const int n = value.get<int>();
        if (n < 0) throw Error(ErrorCode::InvariantViolation, "negative count for " + key);
        c.counts[*order] = n;
      }
    }
    if (j.contains("label_counts")) {
      for (const auto& [key, value] : j.at("label_counts").items()) {
        const auto label = DistortionLabel::decode(key);
        const int n = value.get<int>();
        if (n < 0) throw Error(ErrorCode::InvariantViolation, "negative count for " + key);
        c.label_counts[label.encode()] = n;
      }
    }
    if (j.contains("allowed_composites")) {
      for (const auto& set : j.at("allowed_composites")) {
        std::vector<LabelEntry> probe;
        std::vector<Category> cats;
        for (const auto& token : set) {
          const auto cat = parse_category(token.get<std::string>());
          if (!cat) throw Error(ErrorCode::ParseError, "unknown category " + token.dump());
          cats.push_back(*cat);
          probe.push_back({*cat, Severity::Severe});
        }
        if (auto problem = DistortionLabel::check(probe)) {
          throw Error(ErrorCode::InvariantViolation, "allowed composite: " + *problem);
        }
        std::sort(cats.begin(), cats.end());
        c.allowed_composites.push_back(std::move(cats));
      }
    }
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (c.test_fraction < 0.0 || c.test_fraction > 1.0) {
      throw Error(ErrorCode::InvariantViolation, "test_fraction must lie in [0,1]");
    }
    if (j.contains("params")) c.params = synthesis_params_from_json(j.at("params"));
    if (j.contains("image_format")) {
      const auto fmt = j.at("image_format").get<std::string>();
      if (fmt != "png" && fmt != "ppm") throw Error(ErrorCode::ParseError, "image_format " + fmt);
      c.image_extension = "." + fmt;
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("benchmark config: ") + ex.what());
  }
  return c;
}

std::vector<DistortionLabel> labels_for_order(Order order,
                                              const std::vector<std::vector<Category>>& allowed) {
  std::vector<DistortionLabel> out;
  const std::size_t n = order_size(order);
  for (auto& label : enumerate_valid_labels()) {
    if (label.size() != n) continue;
    if (n >= 2 && !allowed.empty()) {
      std::vector<Category> cats;
      for (const auto& e : label.entries()) cats.push_back(e.category);
      if (std::find(allowed.begin(), allowed.end(), cats) == allowed.end()) continue;
    }
    out.push_back(std::move(label));
  }
  return out;
}

Rng entry_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return Rng(seq);
}

std::vector<PlannedEntry> plan_benchmark(const BenchmarkConfig& config, std::size_t source_count) {
  std::vector<DistortionLabel> labels;
  for (Order order : {Order::Normal, Order::Single, Order::Second, Order::Third}) {
    const auto it = config.counts.find(order);
    if (it == config.counts.end() || it->second == 0) continue;
    const auto pool = labels_for_order(order, config.allowed_composites);
    if (pool.empty()) {
      throw Error(ErrorCode::InvariantViolation, "no allowed labels for a requested order");
    }
    for (int i = 0; i < it->second; ++i) labels.push_back(pool[static_cast<std::size_t>(i) % pool.size()]);
  }
  for (const auto& [text, n] : config.label_counts) {
    const auto label = DistortionLabel::decode(text);
    for (int i = 0; i < n; ++i) labels.push_back(label);
  }
  if (labels.size() > source_count) {
    throw Error(ErrorCode::InsufficientSourceImages,
                std::to_string(labels.size()) + " entries requested from " +
                    std::to_string(source_count) + " clean images");
  }

  std::vector<std::size_t> sources(source_count);
  for (std::size_t i = 0; i < source_count; ++i) sources[i] = i;
  Rng shuffle_rng = entry_rng(config.seed, ~0ull);
  std::shuffle(sources.begin(), sources.end(), shuffle_rng);

  std::map<std::string, int> totals;
  for (const auto& l : labels) ++totals[l.encode()];
  std::map<std::string, int> seen;

  std::vector<PlannedEntry> plan;
  plan.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto key = labels[i].encode();
    const int n_test =
        static_cast<int>(std::lround(totals[key] * config.test_fraction));
    const int k = seen[key]++;
    char id[32];
    std::snprintf(id, sizeof id, "b%05zu", i);
    plan.push_back({id, labels[i], sources[i], k < n_test ? Split::Test : Split::Train,
                    config.seed * 1000003ull + i});
  }
  return plan;
}

DatasetManifest build_benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir) {
  config.params.validate();
  const DatasetManifest source = read_manifest(config.source_manifest);
  std::vector<std::filesystem::path> clean;
  for (const auto& e : source.entries) {
    if (e.clean_path) {
      clean.push_back(source.resolve(*e.clean_path));
    } else if (e.label.empty()) {
      clean.push_back(source.resolve(e.distorted_path));
    }
  }
  const auto plan = plan_benchmark(config, clean.size());

  std::filesystem::create_directories(out_dir / "images");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    const auto clean_path = std::filesystem::weakly_canonical(clean[p.source_index]);
    const ImageBuf img = load_image(clean_path);
    Rng rng = entry_rng(p.seed, i);
    AppliedSynthesis applied;
    const ImageBuf distorted = compose_distortions(img, p.label, config.params, rng, &applied);

    const std::string rel = "images/" + p.id + config.image_extension;
    save_image(distorted, out_dir / rel);
    json sidecar = {{"id", p.id},
                    {"seed", p.seed},
                    {"source", clean_path.string()},
                    {"applied", to_json(applied)}};
    std::ofstream(sidecar_path(out_dir / rel)) << sidecar.dump(2) << "\n";

    manifest.entries.push_back({p.id, clean_path.string(), rel, p.label, p.split});
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace endoagent::bench
