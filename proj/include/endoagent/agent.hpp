#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "endoagent/context.hpp"
#include "endoagent/enhance.hpp"
#include "endoagent/image.hpp"
#include "endoagent/label.hpp"
#include "endoagent/prior.hpp"

namespace endoagent::agent {

enum class Mode { Direct, Cot };
std::string_view to_string(Mode m) noexcept;

/// Ordered multimodal prompt. `serialize` is the canonical byte form used for
/// the size budget and the cache key.
struct PromptDocument {
  Mode mode = Mode::Direct;
  std::vector<PromptPart> parts;

  std::string serialize() const;
  std::size_t byte_size() const;
  /// Concatenated text parts; image parts become "[image]".
  std::string text_only() const;
};

/// Probabilities are written with four decimals, categories in canonical order.
std::string format_priors(const prior::SoftLabels& soft);

/// Instructions, rendered few-shot context, prior block, query image and the
/// answer instruction. In Cot mode the reasoning-steps block appears once.
PromptDocument assemble_prompt(const ImageBuf& img, const prior::SoftLabels& soft,
                               const std::vector<PromptPart>& context_parts, Mode mode);
PromptDocument assemble_prompt(const ImageBuf& img, const prior::SoftLabels& soft,
                               const context::FewShotContext& ctx, const DatasetManifest& manifest,
                               Mode mode);

/// Appended on the single re-ask after a ParseFailure.
inline constexpr std::string_view kFormatReminder =
    "Your previous answer could not be parsed. Reply again and end with exactly one JSON object "
    "of the form {\"distortions\":[{\"category\":...,\"severity\":...}]}.";

struct ReasoningTrace {
  std::vector<std::string> steps;
};

/// Extracts the single {"distortions": [...]} object and the reasoning steps
/// before it (numbered lines; other nonempty lines when none are numbered).
/// Throws ParseFailure for zero or several answer objects, schema mismatches
/// and, in Cot mode, an empty trace. Label rule breaks raise InvariantViolation.
std::pair<DistortionLabel, ReasoningTrace> parse_prediction(std::string_view raw,
                                                            Mode mode = Mode::Direct);

/// Answer object for a label, in the schema parse_prediction accepts.
std::string answer_json(const DistortionLabel& label);

enum class BackendKind { Mock, Http };
enum class MockPolicy { GroundTruth, EchoPrior, FixedLabel, Noisy };
std::string_view to_string(MockPolicy p) noexcept;

/// Corruption rate of the noisy mock as a function of context size:
/// max(0.05, 0.35 - 0.02 k).
double noisy_epsilon_for(int k);

struct BackendDescriptor {
  BackendKind kind = BackendKind::Mock;
  std::string model_id = "mock";
  std::string endpoint;  // http only, e.g. http://host:8080/v1/chat/completions
  double timeout_s = 60.0;
  int max_retries = 3;
  int backoff_ms = 500;
  int max_in_flight = 4;
  std::string api_key_env = "ENDOAGENT_API_KEY";
  /// Merged into the request body (temperature, max_tokens, ...).
  nlohmann::json options = nlohmann::json::object();
  std::size_t max_prompt_bytes = 16u << 20;
  bool reask_on_parse_failure = false;

  MockPolicy policy = MockPolicy::GroundTruth;
  DistortionLabel fixed_label;
  /// Noisy policy: explicit rate, or derived from the context size when unset.
  std::optional<double> epsilon;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  static BackendDescriptor from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// What a backend sees. Only the prompt goes over the wire; the rest feeds
/// the mock policies.
struct BackendRequest {
  const PromptDocument* prompt = nullptr;
  std::string image_id;
  const prior::SoftLabels* soft = nullptr;
  const DistortionLabel* truth = nullptr;
  int context_size = 0;
};

struct BackendResponse {
  std::string text;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string model_id() const = 0;
  BackendResponse complete(const BackendRequest& request);
  std::size_t invocations() const { return calls_.load(); }

 protected:
  virtual BackendResponse do_complete(const BackendRequest& request) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(BackendDescriptor descriptor);
  std::string model_id() const override;

 protected:
  BackendResponse do_complete(const BackendRequest& request) override;

 private:
  BackendDescriptor d_;
};

/// Chat-completions client. Retries transport errors and non-2xx statuses
/// with exponential backoff; concurrent requests are capped at max_in_flight.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor descriptor);
  ~HttpBackend() override;
  std::string model_id() const override { return d_.model_id; }

  /// Request body for a prompt, exposed for tests.
  nlohmann::json request_body(const PromptDocument& prompt) const;

 protected:
  BackendResponse do_complete(const BackendRequest& request) override;

 private:
  struct Limiter;
  BackendDescriptor d_;
  std::unique_ptr<Limiter> limiter_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

/// Content-addressed response store. With a directory, each entry is
/// <key>.txt (raw response bytes) plus <key>.json (metadata); without one it
/// is memory only. Reads are concurrent, writes exclusive.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view model_id, const PromptDocument& prompt);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& response, const nlohmann::json& metadata);
  std::size_t hits() const { return hits_.load(); }

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string> memory_;
  mutable std::atomic<std::size_t> hits_{0};
};

struct BackendMeta {
  std::string model_id;
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  bool cache_hit = false;
  int attempts = 1;
};

struct AgentPrediction {
  DistortionLabel label;
  ReasoningTrace trace;
  std::string raw_response;
  BackendMeta meta;
};

struct InferenceOptions {
  std::size_t max_prompt_bytes = 16u << 20;
  bool reask_on_parse_failure = false;
};

/// Cache first, then the backend. Throws PromptTooLarge before any I/O, the
/// backend's BackendTimeout / BackendRefusal, and parse errors carrying the
/// raw response in Error::detail().
AgentPrediction run_inference(Backend& backend, const BackendRequest& request, ResponseCache& cache,
                              const InferenceOptions& options = {});

/// One step per label entry in canonical order. Throws NoModelForLabel.
enhance::EnhancementPlan select_models(const DistortionLabel& label,
                                       const enhance::EnhancerRegistry& registry);

}  // namespace endoagent::agent
