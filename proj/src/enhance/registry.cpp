#include <fstream>
#include <set>

#include "endoagent/encoding.hpp"
#include "endoagent/enhance.hpp"
#include "endoagent/error.hpp"

namespace endoagent::enhance {

using nlohmann::json;

std::string_view to_token(Operator op) noexcept {
  switch (op) {
    case Operator::LowLight: return "low_light";
    case Operator::Exposure: return "exposure";
    case Operator::Deblur: return "deblur";
    case Operator::Desmoke: return "desmoke";
  }
  return "?";
}

Operator operator_for(Category c) noexcept {
  switch (c) {
    case Category::Smoke: return Operator::Desmoke;
    case Category::MotionBlur: return Operator::Deblur;
    case Category::OverExposure: return Operator::Exposure;
    case Category::LowLight: return Operator::LowLight;
  }
  return Operator::LowLight;
}

namespace {

std::optional<Operator> parse_operator(std::string_view s) {
  for (Operator op : {Operator::LowLight, Operator::Exposure, Operator::Deblur, Operator::Desmoke}) {
    if (to_token(op) == s) return op;
  }
  return std::nullopt;
}

LowLightPreset low_light_preset(const json& j) {
  LowLightPreset p;
  p.gamma = j.value("gamma", p.gamma);
  p.gain = j.value("gain", p.gain);
  p.denoise = j.value("denoise", p.denoise);
  return p;
}
json preset_json(const LowLightPreset& p) {
  return {{"gamma", p.gamma}, {"gain", p.gain}, {"denoise", p.denoise}};
}

ExposurePreset exposure_preset(const json& j) {
  ExposurePreset p;
  p.gain = j.value("gain", p.gain);
  p.knee = j.value("knee", p.knee);
  p.highlight_boost = j.value("highlight_boost", p.highlight_boost);
  return p;
}
json preset_json(const ExposurePreset& p) {
  return {{"gain", p.gain}, {"knee", p.knee}, {"highlight_boost", p.highlight_boost}};
}

DeblurPreset deblur_preset(const json& j) {
  DeblurPreset p;
  p.kernel_length = j.value("kernel_length", p.kernel_length);
  p.angle = j.value("angle", p.angle);
  p.iterations = j.value("iterations", p.iterations);
  return p;
}
json preset_json(const DeblurPreset& p) {
  return {{"kernel_length", p.kernel_length}, {"angle", p.angle}, {"iterations", p.iterations}};
}

DesmokePreset desmoke_preset(const json& j) {
  DesmokePreset p;
  p.omega = j.value("omega", p.omega);
  p.t_min = j.value("t_min", p.t_min);
  p.patch_radius = j.value("patch_radius", p.patch_radius);
  p.airlight_fraction = j.value("airlight_fraction", p.airlight_fraction);
  p.refine = j.value("refine", p.refine);
  p.guide_radius = j.value("guide_radius", p.guide_radius);
  p.guide_eps = j.value("guide_eps", p.guide_eps);
  return p;
}
json preset_json(const DesmokePreset& p) {
  return {{"omega", p.omega},         {"t_min", p.t_min},
          {"patch_radius", p.patch_radius}, {"airlight_fraction", p.airlight_fraction},
          {"refine", p.refine},       {"guide_radius", p.guide_radius},
          {"guide_eps", p.guide_eps}};
}

std::string key_string(Category c, Severity s) {
  return std::string(to_token(c)) + ":" + std::string(to_token(s));
}

}  // namespace

EnhancerRegistry EnhancerRegistry::defaults() {
  EnhancerRegistry r;
  r.set(Category::LowLight, Severity::Mild,
        {"low_light_enhancer@mild", Operator::LowLight, preset_json(LowLightPreset{1.8, 0.7, false})});
  r.set(Category::LowLight, Severity::Severe,
        {"low_light_enhancer@severe", Operator::LowLight, preset_json(LowLightPreset{2.8, 0.4, true})});
  r.set(Category::OverExposure, Severity::Mild,
        {"exposure@mild", Operator::Exposure, preset_json(ExposurePreset{1.5, 0.9, 2.0})});
  r.set(Category::OverExposure, Severity::Severe,
        {"exposure@severe", Operator::Exposure, preset_json(ExposurePreset{2.2, 0.9, 3.0})});
  r.set(Category::MotionBlur, Severity::Mild,
        {"deblur@mild", Operator::Deblur, preset_json(DeblurPreset{7, 0.0, 40})});
  r.set(Category::MotionBlur, Severity::Severe,
        {"deblur@severe", Operator::Deblur, preset_json(DeblurPreset{17, 0.0, 40})});
  r.set(Category::Smoke, Severity::Severe, {"desmoke@severe", Operator::Desmoke, preset_json(DesmokePreset{})});
  return r;
}

void EnhancerRegistry::set(Category c, Severity s, EnhancerSpec spec) {
  entries_[{c, s}] = std::move(spec);
}

const EnhancerSpec* EnhancerRegistry::find(Category c, Severity s) const {
  const auto it = entries_.find({c, s});
  return it == entries_.end() ? nullptr : &it->second;
}

void EnhancerRegistry::validate() const {
  for (Category c : kCategories) {
    for (Severity s : {Severity::Mild, Severity::Severe}) {
      if (c == Category::Smoke && s == Severity::Mild) continue;
      if (!find(c, s)) throw Error(ErrorCode::InvariantViolation, "registry lacks " + key_string(c, s));
    }
  }
  std::set<std::string> ids;
  for (const auto& [key, spec] : entries_) {
    if (key.second == Severity::Normal) {
      throw Error(ErrorCode::InvariantViolation, "registry entry with severity normal");
    }
    if (!ids.insert(spec.id).second) throw Error(ErrorCode::InvariantViolation, "duplicate enhancer id " + spec.id);
  }
}

EnhancerRegistry EnhancerRegistry::from_json(const json& j) {
  EnhancerRegistry r;
  try {
    for (const auto& [key, value] : j.items()) {
      const auto colon = key.find(':');
      if (colon == std::string::npos) throw Error(ErrorCode::ParseError, "registry key " + key);
      const auto c = parse_category(std::string_view(key).substr(0, colon));
      const auto s = parse_severity(std::string_view(key).substr(colon + 1));
      if (!c || !s) throw Error(ErrorCode::ParseError, "registry key " + key);
      EnhancerSpec spec;
      spec.id = value.at("id").get<std::string>();
      const auto op = value.contains("operator")
                          ? parse_operator(value.at("operator").get<std::string>())
                          : std::optional<Operator>(operator_for(*c));
      if (!op) throw Error(ErrorCode::ParseError, "unknown operator for " + key);
      spec.op = *op;
      spec.preset = value.value("preset", json::object());
      r.set(*c, *s, std::move(spec));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("registry: ") + ex.what());
  }
  r.validate();
  return r;
}

EnhancerRegistry EnhancerRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
}

json EnhancerRegistry::to_json() const {
  json j = json::object();
  for (const auto& [key, spec] : entries_) {
    j[key_string(key.first, key.second)] = {
        {"id", spec.id}, {"operator", to_token(spec.op)}, {"preset", spec.preset}};
  }
  return j;
}

ImageBuf run_enhancer(const ImageBuf& img, const EnhancerSpec& spec, Severity severity,
                      const bench::AppliedSynthesis* metadata, json* resolved_params) {
  try {
    switch (spec.op) {
      case Operator::LowLight: {
        const auto p = low_light_preset(spec.preset);
        if (resolved_params) *resolved_params = preset_json(p);
        return enhance_low_light(img, severity, p);
      }
      case Operator::Exposure: {
        const auto p = exposure_preset(spec.preset);
        if (resolved_params) *resolved_params = preset_json(p);
        return correct_exposure(img, severity, p);
      }
      case Operator::Deblur: {
        auto p = deblur_preset(spec.preset);
        if (metadata && metadata->motion_blur && metadata->motion_blur->angle) {
          p.angle = *metadata->motion_blur->angle;
        }
        if (resolved_params) *resolved_params = preset_json(p);
        return deblur(img, severity, p);
      }
      case Operator::Desmoke: {
        const auto p = desmoke_preset(spec.preset);
        if (resolved_params) *resolved_params = preset_json(p);
        return desmoke(img, severity, p);
      }
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, "preset for " + spec.id + ": " + ex.what());
  }
  throw Error(ErrorCode::InvalidArgument, "unknown operator");
}

PlanResult apply_plan(const ImageBuf& img, const EnhancementPlan& plan,
                      const EnhancerRegistry& registry, const bench::AppliedSynthesis* metadata) {
  for (const auto& step : plan.steps) {
    const EnhancerSpec* spec = registry.find(step.category, step.severity);
    if (!spec || spec->id != step.enhancer_id) {
      throw Error(ErrorCode::NoModelForLabel, "no enhancer " + step.enhancer_id + " for " +
                                                  key_string(step.category, step.severity));
    }
  }
  PlanResult result{img, {}};
  std::string current = plan.empty() ? std::string() : image_hash(img);
  for (const auto& step : plan.steps) {
    const EnhancerSpec* spec = registry.find(step.category, step.severity);
    StepRecord rec;
    rec.enhancer_id = spec->id;
    rec.input_hash = current;
    result.image = run_enhancer(result.image, *spec, step.severity, metadata, &rec.params);
    current = image_hash(result.image);
    rec.output_hash = current;
    result.provenance.push_back(std::move(rec));
  }
  return result;
}

json to_json(const EnhancementPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps) {
    steps.push_back({{"enhancer_id", s.enhancer_id},
                     {"category", to_token(s.category)},
                     {"severity", to_token(s.severity)}});
  }
  return steps;
}

json to_json(const StepRecord& record) {
  return {{"enhancer_id", record.enhancer_id},
          {"params", record.params},
          {"input_hash", record.input_hash},
          {"output_hash", record.output_hash}};
}

}  // namespace endoagent::enhance
