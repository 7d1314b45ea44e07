#include <fstream>
#include <sstream>

#include "endoagent/encoding.hpp"
#include "endoagent/error.hpp"
#include "endoagent/harness.hpp"

namespace endoagent::harness {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(RunMode m) noexcept {
  switch (m) {
    case RunMode::PriorOnly: return "prior_only";
    case RunMode::AgentDirect: return "agent_direct";
    case RunMode::AgentCot: return "agent_cot";
  }
  return "?";
}

std::optional<RunMode> parse_run_mode(std::string_view s) noexcept {
  for (RunMode m : {RunMode::PriorOnly, RunMode::AgentDirect, RunMode::AgentCot}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

namespace {

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j[key].is_null()) return {};
  fs::path p = j[key].get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.manifest = resolve(j, "manifest", base_dir);
    c.prior_model = resolve(j, "prior_model", base_dir);
    c.registry = resolve(j, "registry", base_dir);
    c.output_dir = resolve(j, "output_dir", base_dir);
    c.cache_dir = resolve(j, "cache_dir", base_dir);
    c.seed = j.value("seed", c.seed);

    json ctx = j.value("context", json::object());
    if (!ctx.contains("seed")) ctx["seed"] = c.seed;
    c.context = context::ContextConfig::from_json(ctx);

    json backend = j.value("backend", json::object());
    if (!backend.contains("seed")) backend["seed"] = c.seed;
    c.backend = agent::BackendDescriptor::from_json(backend);

    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j["modes"]) {
        const auto mode = parse_run_mode(m.get<std::string>());
        if (!mode) throw Error(ErrorCode::ConfigError, "unknown mode " + m.dump());
        c.modes.push_back(*mode);
      }
    }
    if (j.contains("resize") && !j["resize"].is_null()) c.resize = j["resize"].get<int>();
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    c.no_reference_metrics = j.value("no_reference_metrics", c.no_reference_metrics);
    c.baselines = j.value("baselines", c.baselines);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("run config: ") + ex.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

json RunConfig::to_json() const {
  json modes_json = json::array();
  for (RunMode m : modes) modes_json.push_back(to_string(m));
  return {{"manifest", manifest.string()},
          {"prior_model", prior_model.string()},
          {"registry", registry.string()},
          {"output_dir", output_dir.string()},
          {"cache_dir", cache_dir.string()},
          {"context", context.to_json()},
          {"backend", backend.to_json()},
          {"modes", modes_json},
          {"seed", seed},
          {"resize", resize ? json(*resize) : json(nullptr)},
          {"max_parallel", max_parallel},
          {"no_reference_metrics", no_reference_metrics},
          {"baselines", baselines}};
}

void RunConfig::validate() const {
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::exists(p)) {
      throw Error(ErrorCode::ConfigError, std::string(what) + " not found: " + p.string());
    }
  };
  require(manifest, "manifest");
  require(prior_model, "prior model");
  if (!registry.empty()) require(registry, "registry");
  if (output_dir.empty()) throw Error(ErrorCode::ConfigError, "output_dir is required");
  if (modes.empty()) throw Error(ErrorCode::ConfigError, "no modes selected");
  if (max_parallel < 1) throw Error(ErrorCode::ConfigError, "max_parallel must be >= 1");
  if (resize && *resize < 8) throw Error(ErrorCode::ConfigError, "resize must be >= 8 pixels");
  try {
    context.validate();
    backend.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

fs::path RunConfig::effective_cache_dir() const {
  return cache_dir.empty() ? output_dir / "cache" : cache_dir;
}

std::string config_hash(const RunConfig& config) {
  json j = config.to_json();
  j.erase("manifest");
  j.erase("prior_model");
  j.erase("registry");
  j.erase("output_dir");
  j.erase("cache_dir");
  j.erase("max_parallel");
  j["manifest_sha256"] = file_digest(config.manifest);
  j["prior_model_sha256"] = config.prior_model.empty() ? "" : file_digest(config.prior_model);
  j["registry_sha256"] = config.registry.empty() ? "defaults" : file_digest(config.registry);
  return sha256_hex(j.dump());
}

}  // namespace endoagent::harness
