#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

#include "endoagent/agent.hpp"
#include "endoagent/encoding.hpp"
#include "endoagent/error.hpp"

namespace endoagent::agent {

using nlohmann::json;

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(*dir_);
}

std::string ResponseCache::key(std::string_view model_id, const PromptDocument& prompt) {
  std::string bytes(model_id);
  bytes += '\0';
  bytes += prompt.serialize();
  return sha256_hex(bytes);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  if (const auto it = memory_.find(key); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / (key + ".txt"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  ++hits_;
  return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& response, const json& metadata) {
  std::unique_lock lock(mutex_);
  memory_[key] = response;
  if (!dir_) return;
  auto write = [&](const std::filesystem::path& target, const std::string& bytes) {
    const auto tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, target);
  };
  write(*dir_ / (key + ".json"), metadata.dump(2) + "\n");
  write(*dir_ / (key + ".txt"), response);
}

namespace {

struct Exchange {
  std::string text;
  BackendMeta meta;
};

Exchange exchange(Backend& backend, const BackendRequest& request, const PromptDocument& prompt,
                  ResponseCache& cache, const InferenceOptions& options) {
  const std::size_t bytes = prompt.byte_size();
  if (bytes > options.max_prompt_bytes) {
    throw Error(ErrorCode::PromptTooLarge, "prompt is " + std::to_string(bytes) + " bytes, budget " +
                                               std::to_string(options.max_prompt_bytes));
  }
  Exchange ex;
  ex.meta.model_id = backend.model_id();
  const std::string key = ResponseCache::key(ex.meta.model_id, prompt);
  if (auto hit = cache.get(key)) {
    ex.text = std::move(*hit);
    ex.meta.cache_hit = true;
    return ex;
  }
  BackendRequest req = request;
  req.prompt = &prompt;
  const auto start = std::chrono::steady_clock::now();
  BackendResponse r = backend.complete(req);
  ex.meta.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ex.meta.prompt_tokens = r.prompt_tokens;
  ex.meta.completion_tokens = r.completion_tokens;
  json meta = {{"model_id", ex.meta.model_id}, {"prompt_sha256", sha256_hex(prompt.serialize())},
               {"prompt_bytes", bytes}, {"response_bytes", r.text.size()}};
  if (r.prompt_tokens) meta["prompt_tokens"] = *r.prompt_tokens;
  if (r.completion_tokens) meta["completion_tokens"] = *r.completion_tokens;
  cache.put(key, r.text, meta);
  ex.text = std::move(r.text);
  return ex;
}

}  // namespace

AgentPrediction run_inference(Backend& backend, const BackendRequest& request, ResponseCache& cache,
                              const InferenceOptions& options) {
  if (!request.prompt) throw Error(ErrorCode::InvalidArgument, "inference request without a prompt");
  const PromptDocument& prompt = *request.prompt;
  Exchange ex = exchange(backend, request, prompt, cache, options);
  try {
    auto [label, trace] = parse_prediction(ex.text, prompt.mode);
    return {std::move(label), std::move(trace), std::move(ex.text), std::move(ex.meta)};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseFailure || !options.reask_on_parse_failure) throw;
  }
  PromptDocument again = prompt;
  again.parts.push_back({PromptPart::Kind::Text, "Previous reply:\n" + ex.text + "\n"});
  again.parts.push_back({PromptPart::Kind::Text, std::string(kFormatReminder) + "\n"});
  Exchange retry = exchange(backend, request, again, cache, options);
  retry.meta.attempts = 2;
  auto [label, trace] = parse_prediction(retry.text, prompt.mode);
  return {std::move(label), std::move(trace), std::move(retry.text), std::move(retry.meta)};
}

enhance::EnhancementPlan select_models(const DistortionLabel& label,
                                       const enhance::EnhancerRegistry& registry) {
  enhance::EnhancementPlan plan;
  for (const auto& e : label.entries()) {
    const enhance::EnhancerSpec* spec = registry.find(e.category, e.severity);
    if (!spec) {
      throw Error(ErrorCode::NoModelForLabel, "no enhancer for " + std::string(to_token(e.category)) + ":" +
                                                  std::string(to_token(e.severity)));
    }
    plan.steps.push_back({spec->id, e.category, e.severity});
  }
  return plan;
}

}  // namespace endoagent::agent
