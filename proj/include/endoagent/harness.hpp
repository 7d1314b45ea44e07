#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "endoagent/agent.hpp"
#include "endoagent/context.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::harness {

enum class RunMode { PriorOnly, AgentDirect, AgentCot };
std::string_view to_string(RunMode m) noexcept;
std::optional<RunMode> parse_run_mode(std::string_view s) noexcept;

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path prior_model;
  /// Empty means the built-in default registry.
  std::filesystem::path registry;
  std::filesystem::path output_dir;
  /// Empty means output_dir/cache.
  std::filesystem::path cache_dir;
  context::ContextConfig context;
  agent::BackendDescriptor backend;
  std::vector<RunMode> modes = {RunMode::PriorOnly, RunMode::AgentCot};
  std::uint64_t seed = 7;
  /// Longest image side after ingest; unset keeps the native size.
  std::optional<int> resize;
  int max_parallel = 1;
  /// Fit NIQE/BRISQUE on the train split and score every image with them.
  bool no_reference_metrics = true;
  /// Score each category's severe enhancer applied to every image.
  bool baselines = true;

  /// Relative paths resolve against `base_dir`. A context or backend block
  /// without its own seed inherits the run seed. Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// Throws ConfigError when a referenced path is missing or a field is invalid.
  void validate() const;
  std::filesystem::path effective_cache_dir() const;
};

/// Digest of everything that determines record bytes: the config without
/// output/cache paths and parallelism, plus the manifest, prior model and
/// registry contents.
std::string config_hash(const RunConfig& config);

struct RunSummary {
  std::filesystem::path run_dir;
  std::size_t total_records = 0;
  std::size_t new_records = 0;
  std::size_t backend_calls = 0;
  std::size_t failed_predictions = 0;
};

/// Processes every test entry and appends one JSON line per entry to
/// records.jsonl in manifest order. An existing run directory is resumed:
/// a torn last line is dropped, finished records are kept byte for byte.
/// `backend_override` replaces the configured backend (used for fault
/// injection). Throws ConfigError; per-image failures land in the records.
RunSummary run_pipeline(const RunConfig& config, agent::Backend* backend_override = nullptr);

/// Writes reports/{accuracy,metrics}.{md,csv} and reports/summary.json.
/// Throws IncompleteRun when records are missing or there are none.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& run_dir);

/// Accuracy report recomputed from records.jsonl for one mode.
metrics::AccuracyReport accuracy_from_records(const std::filesystem::path& run_dir, RunMode mode);

struct AblationResult {
  std::vector<std::filesystem::path> run_dirs;
  std::vector<std::filesystem::path> report_files;
};

/// One run per context config under base.output_dir/ablation_<i>, all
/// sharing base's cache directory, then reports/ablation.{md,csv} in the
/// base output directory with one column per config in input order.
/// Throws ConfigError for fewer than two configs.
AblationResult ablation_sweep(const RunConfig& base, const std::vector<context::ContextConfig>& contexts,
                              agent::Backend* backend_override = nullptr);

/// Ablation grid over existing run directories (agent modes only).
std::vector<std::filesystem::path> emit_ablation_report(const std::vector<std::filesystem::path>& run_dirs,
                                                        const std::filesystem::path& out_dir);

}  // namespace endoagent::harness
