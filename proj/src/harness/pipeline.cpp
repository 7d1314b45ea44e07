#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "endoagent/bench.hpp"
#include "endoagent/error.hpp"
#include "endoagent/harness.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

json error_json(const Error& e) {
  json j = {{"code", to_string(e.code())}, {"message", e.what()}};
  return j;
}

ImageBuf ingest(ImageBuf img, const std::optional<int>& resize) {
  if (!resize) return img;
  const int side = std::max(img.width(), img.height());
  if (side <= *resize) return img;
  const double s = static_cast<double>(*resize) / side;
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
  return resize_area(img, w, h);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops a torn final line (no trailing newline) and returns the complete lines.
std::vector<std::string> read_complete_lines(const fs::path& p) {
  std::vector<std::string> lines;
  if (!fs::exists(p)) return lines;
  std::string text = read_file(p);
  const auto last_nl = text.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != text.size()) fs::resize_file(p, keep);
  std::size_t pos = 0;
  while (pos < keep) {
    const auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

struct Shared {
  const RunConfig* cfg = nullptr;
  std::string hash;
  DatasetManifest manifest;
  prior::PriorModel prior;
  enhance::EnhancerRegistry registry;
  std::vector<PromptPart> context_parts;
  int context_size = 0;
  agent::Backend* backend = nullptr;
  agent::ResponseCache* cache = nullptr;
  std::optional<metrics::NiqeModel> niqe;
  std::optional<metrics::BrisqueModel> brisque;
};

json metric_block(const Shared& s, const ImageBuf& img, const ImageBuf* clean) {
  json j = json::object();
  if (clean && clean->width() == img.width() && clean->height() == img.height()) {
    j["psnr"] = metrics::psnr(*clean, img);
    j["ssim"] = metrics::ssim(*clean, img);
  }
  if (s.niqe) {
    try {
      j["niqe"] = metrics::niqe(*s.niqe, img);
    } catch (const Error&) {
      j["niqe"] = nullptr;
    }
  }
  if (s.brisque) {
    try {
      j["brisque"] = metrics::brisque(*s.brisque, img);
    } catch (const Error&) {
      j["brisque"] = nullptr;
    }
  }
  return j;
}

json run_mode(const Shared& s, RunMode mode, const ManifestEntry& entry, const ImageBuf& img,
              const ImageBuf* clean, const prior::SoftLabels& soft,
              const std::optional<bench::AppliedSynthesis>& sidecar, json& timing) {
  json out = {{"predicted", nullptr}, {"error", nullptr},       {"trace", json::array()},
              {"raw_response", nullptr}, {"plan", json::array()}, {"provenance", json::array()}};
  std::optional<DistortionLabel> predicted;
  const auto start = Clock::now();
  if (mode == RunMode::PriorOnly) {
    predicted = prior::hard_label(soft);
  } else {
    const auto am = mode == RunMode::AgentCot ? agent::Mode::Cot : agent::Mode::Direct;
    try {
      const agent::PromptDocument prompt = agent::assemble_prompt(img, soft, s.context_parts, am);
      agent::BackendRequest req{&prompt, entry.id, &soft, &entry.label, s.context_size};
      agent::InferenceOptions opts{s.cfg->backend.max_prompt_bytes, s.cfg->backend.reask_on_parse_failure};
      auto pred = agent::run_inference(*s.backend, req, *s.cache, opts);
      predicted = pred.label;
      out["trace"] = pred.trace.steps;
      out["raw_response"] = pred.raw_response;
      timing["cache_hit"] = pred.meta.cache_hit;
      timing["backend_latency_ms"] = pred.meta.latency_ms;
      timing["attempts"] = pred.meta.attempts;
    } catch (const Error& e) {
      out["error"] = error_json(e);
      if (!e.detail().empty()) out["raw_response"] = e.detail();
    }
  }

  ImageBuf enhanced = img;
  if (predicted) {
    out["predicted"] = predicted->encode();
    try {
      const auto plan = agent::select_models(*predicted, s.registry);
      out["plan"] = enhance::to_json(plan);
      auto result = enhance::apply_plan(img, plan, s.registry, sidecar ? &*sidecar : nullptr);
      for (const auto& rec : result.provenance) out["provenance"].push_back(enhance::to_json(rec));
      enhanced = std::move(result.image);
    } catch (const Error& e) {
      out["error"] = error_json(e);
    }
  }
  out["enhanced"] = metric_block(s, enhanced, clean);
  timing["ms"] = ms_since(start);
  return out;
}

std::pair<std::string, std::string> process_entry(const Shared& s, const ManifestEntry& entry) {
  const auto start = Clock::now();
  json rec = {{"id", entry.id},
              {"truth", entry.label.encode()},
              {"split", to_string(entry.split)},
              {"paired", entry.paired()},
              {"config_hash", s.hash}};
  json timing = {{"id", entry.id}, {"modes", json::object()}};
  try {
    const fs::path distorted_path = s.manifest.resolve(entry.distorted_path);
    const ImageBuf img = ingest(load_image(distorted_path), s.cfg->resize);
    std::optional<ImageBuf> clean;
    if (entry.clean_path) clean = ingest(load_image(s.manifest.resolve(*entry.clean_path)), s.cfg->resize);
    const auto sidecar = bench::read_sidecar(distorted_path);
    const ImageBuf* clean_ptr = clean ? &*clean : nullptr;

    const prior::SoftLabels soft = prior::prior_distributions(s.prior, img);
    rec["soft"] = prior::to_json(soft);
    rec["distorted"] = metric_block(s, img, clean_ptr);
    json modes = json::object();
    for (RunMode m : s.cfg->modes) {
      json t = json::object();
      modes[std::string(to_string(m))] = run_mode(s, m, entry, img, clean_ptr, soft, sidecar, t);
      timing["modes"][std::string(to_string(m))] = t;
    }
    rec["modes"] = modes;
    if (s.cfg->baselines) {
      json base = json::object();
      for (Category c : kCategories) {
        const auto* spec = s.registry.find(c, Severity::Severe);
        if (!spec) continue;
        const ImageBuf out = enhance::run_enhancer(img, *spec, Severity::Severe, sidecar ? &*sidecar : nullptr);
        base[spec->id] = metric_block(s, out, clean_ptr);
      }
      rec["baselines"] = base;
    }
  } catch (const Error& e) {
    rec["error"] = error_json(e);
  }
  timing["total_ms"] = ms_since(start);
  return {rec.dump(), timing.dump()};
}

void fit_no_reference(Shared& s, const fs::path& run_dir) {
  const fs::path niqe_path = run_dir / "niqe_model.json";
  const fs::path brisque_path = run_dir / "brisque_model.json";
  if (fs::exists(niqe_path)) s.niqe = metrics::NiqeModel::from_json(json::parse(read_file(niqe_path)));
  if (fs::exists(brisque_path)) {
    s.brisque = metrics::BrisqueModel::from_json(json::parse(read_file(brisque_path)));
  }
  if (s.niqe && s.brisque) return;

  std::vector<ImageBuf> pristine;
  std::vector<metrics::NssVector> features;
  std::vector<double> targets;
  std::vector<std::string> seen_clean;
  for (const auto* e : s.manifest.split(Split::Train)) {
    try {
      const ImageBuf d = ingest(load_image(s.manifest.resolve(e->distorted_path)), s.cfg->resize);
      features.push_back(metrics::brisque_features(d));
      targets.push_back(metrics::brisque_target(e->label));
      if (e->clean_path && std::find(seen_clean.begin(), seen_clean.end(), *e->clean_path) == seen_clean.end()) {
        seen_clean.push_back(*e->clean_path);
        pristine.push_back(ingest(load_image(s.manifest.resolve(*e->clean_path)), s.cfg->resize));
        features.push_back(metrics::brisque_features(pristine.back()));
        targets.push_back(0.0);
      }
    } catch (const Error&) {
      // Unreadable or tiny training images only shrink the fitting set.
    }
  }
  if (!s.niqe && pristine.size() >= 20) {
    try {
      s.niqe = metrics::fit_niqe(pristine);
      std::ofstream(niqe_path) << s.niqe->to_json().dump() << "\n";
    } catch (const Error&) {
    }
  }
  if (!s.brisque && features.size() >= 2) {
    s.brisque = metrics::fit_brisque(features, targets);
    std::ofstream(brisque_path) << s.brisque->to_json().dump() << "\n";
  }
}

}  // namespace

RunSummary run_pipeline(const RunConfig& config, agent::Backend* backend_override) {
  config.validate();
  Shared s;
  s.cfg = &config;
  s.hash = config_hash(config);
  try {
    s.manifest = read_manifest(config.manifest);
    s.manifest.validate();
    s.prior = prior::load_model(config.prior_model);
    s.registry = config.registry.empty() ? enhance::EnhancerRegistry::defaults()
                                         : enhance::EnhancerRegistry::load(config.registry);
    const bool agent_modes = std::any_of(config.modes.begin(), config.modes.end(),
                                         [](RunMode m) { return m != RunMode::PriorOnly; });
    if (agent_modes && config.context.k > 0) {
      s.context_parts = context::render_context(context::build_context(s.manifest, config.context), s.manifest);
      s.context_size = config.context.k;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }

  const fs::path run_dir = config.output_dir;
  fs::create_directories(run_dir);
  const fs::path config_path = run_dir / "config.json";
  if (fs::exists(config_path)) {
    const json stored = json::parse(read_file(config_path), nullptr, false);
    if (stored.is_discarded() || stored.value("config_hash", std::string()) != s.hash) {
      throw Error(ErrorCode::ConfigError, "run directory " + run_dir.string() + " belongs to a different config");
    }
  } else {
    json j = config.to_json();
    j["config_hash"] = s.hash;
    std::ofstream(config_path) << j.dump(2) << "\n";
  }

  std::unique_ptr<agent::Backend> owned;
  if (!backend_override) owned = agent::make_backend(config.backend);
  s.backend = backend_override ? backend_override : owned.get();
  const std::size_t calls_before = s.backend->invocations();
  agent::ResponseCache cache(config.effective_cache_dir());
  s.cache = &cache;
  if (config.no_reference_metrics) fit_no_reference(s, run_dir);

  const auto tests = s.manifest.split(Split::Test);
  const fs::path records_path = run_dir / "records.jsonl";
  const fs::path timings_path = run_dir / "timings.jsonl";
  std::vector<std::string> existing = read_complete_lines(records_path);
  read_complete_lines(timings_path);

  // Keep the longest prefix of well-formed records that match the plan.
  std::size_t done = 0;
  for (; done < existing.size() && done < tests.size(); ++done) {
    const json j = json::parse(existing[done], nullptr, false);
    if (j.is_discarded() || j.value("id", std::string()) != tests[done]->id) break;
  }
  if (done < existing.size()) {
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < done; ++i) bytes += existing[i].size() + 1;
    fs::resize_file(records_path, bytes);
  }

  std::ofstream records(records_path, std::ios::app | std::ios::binary);
  std::ofstream timings(timings_path, std::ios::app | std::ios::binary);
  if (!records || !timings) throw Error(ErrorCode::IoFailure, "cannot append to " + run_dir.string());

  std::mutex write_mutex;
  std::map<std::size_t, std::pair<std::string, std::string>> pending;
  std::size_t write_pos = done;
  std::atomic<std::size_t> next{done};
  std::size_t failed = 0;

  auto worker = [&] {
    for (std::size_t i = next++; i < tests.size(); i = next++) {
      auto lines = process_entry(s, *tests[i]);
      std::lock_guard lock(write_mutex);
      pending.emplace(i, std::move(lines));
      for (auto it = pending.find(write_pos); it != pending.end(); it = pending.find(write_pos)) {
        records << it->second.first << '\n';
        records.flush();
        timings << it->second.second << '\n';
        timings.flush();
        pending.erase(it);
        ++write_pos;
      }
    }
  };
  const int threads = std::min<int>(config.max_parallel, static_cast<int>(std::max<std::size_t>(1, tests.size() - done)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  records.close();

  for (const auto& line : read_complete_lines(records_path)) {
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    if (j.contains("error")) {
      ++failed;
      continue;
    }
    for (const auto& [mode, block] : j["modes"].items()) {
      if (block["predicted"].is_null()) ++failed;
    }
  }

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.total_records = write_pos;
  summary.new_records = write_pos - done;
  summary.backend_calls = s.backend->invocations() - calls_before;
  summary.failed_predictions = failed;
  return summary;
}

AblationResult ablation_sweep(const RunConfig& base, const std::vector<context::ContextConfig>& contexts,
                              agent::Backend* backend_override) {
  if (contexts.size() < 2) throw Error(ErrorCode::ConfigError, "ablation needs at least two context configs");
  AblationResult result;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    RunConfig cfg = base;
    cfg.context = contexts[i];
    cfg.output_dir = base.output_dir / ("ablation_" + std::to_string(i));
    cfg.cache_dir = base.effective_cache_dir();
    run_pipeline(cfg, backend_override);
    emit_report(cfg.output_dir);
    result.run_dirs.push_back(cfg.output_dir);
  }
  result.report_files = emit_ablation_report(result.run_dirs, base.output_dir / "reports");
  return result;
}

}  // namespace endoagent::harness
