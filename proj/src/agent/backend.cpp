#include <httplib.h>

#include <cstdlib>
#include <cstring>
#include <regex>
#include <semaphore>
#include <thread>

#include "endoagent/agent.hpp"
#include "endoagent/encoding.hpp"
#include "endoagent/error.hpp"

namespace endoagent::agent {

using nlohmann::json;

std::string_view to_string(MockPolicy p) noexcept {
  switch (p) {
    case MockPolicy::GroundTruth: return "ground_truth";
    case MockPolicy::EchoPrior: return "echo_prior";
    case MockPolicy::FixedLabel: return "fixed_label";
    case MockPolicy::Noisy: return "noisy";
  }
  return "?";
}

double noisy_epsilon_for(int k) { return std::max(0.05, 0.35 - 0.02 * k); }

void BackendDescriptor::validate() const {
  if (!(timeout_s > 0.0)) throw Error(ErrorCode::ConfigError, "backend timeout must be > 0");
  if (max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
  if (max_in_flight < 1) throw Error(ErrorCode::ConfigError, "max_in_flight must be >= 1");
  if (kind == BackendKind::Http && endpoint.empty()) {
    throw Error(ErrorCode::ConfigError, "http backend needs an endpoint");
  }
  if (epsilon && (*epsilon < 0.0 || *epsilon > 1.0)) {
    throw Error(ErrorCode::ConfigError, "noisy epsilon must lie in [0, 1]");
  }
}

BackendDescriptor BackendDescriptor::from_json(const json& j) {
  BackendDescriptor d;
  try {
    const std::string kind = j.value("kind", std::string("mock"));
    if (kind == "mock") {
      d.kind = BackendKind::Mock;
    } else if (kind == "http") {
      d.kind = BackendKind::Http;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown backend kind " + kind);
    }
    d.model_id = j.value("model_id", d.kind == BackendKind::Mock ? std::string("mock") : std::string());
    d.endpoint = j.value("endpoint", std::string());
    d.timeout_s = j.value("timeout_s", d.timeout_s);
    d.max_retries = j.value("max_retries", d.max_retries);
    d.backoff_ms = j.value("backoff_ms", d.backoff_ms);
    d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    d.api_key_env = j.value("api_key_env", d.api_key_env);
    d.options = j.value("options", json::object());
    d.max_prompt_bytes = j.value("max_prompt_bytes", d.max_prompt_bytes);
    d.reask_on_parse_failure = j.value("reask_on_parse_failure", false);
    const std::string policy = j.value("policy", std::string("ground_truth"));
    bool found = false;
    for (MockPolicy p : {MockPolicy::GroundTruth, MockPolicy::EchoPrior, MockPolicy::FixedLabel,
                         MockPolicy::Noisy}) {
      if (to_string(p) == policy) {
        d.policy = p;
        found = true;
      }
    }
    if (!found) throw Error(ErrorCode::ConfigError, "unknown mock policy " + policy);
    if (j.contains("fixed_label")) d.fixed_label = DistortionLabel::decode(j["fixed_label"].get<std::string>());
    if (j.contains("epsilon") && !j["epsilon"].is_null()) d.epsilon = j["epsilon"].get<double>();
    d.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("backend descriptor: ") + ex.what());
  }
  d.validate();
  return d;
}

json BackendDescriptor::to_json() const {
  json j = {{"kind", kind == BackendKind::Mock ? "mock" : "http"},
            {"model_id", model_id},
            {"timeout_s", timeout_s},
            {"max_retries", max_retries},
            {"backoff_ms", backoff_ms},
            {"max_in_flight", max_in_flight},
            {"api_key_env", api_key_env},
            {"options", options},
            {"max_prompt_bytes", max_prompt_bytes},
            {"reask_on_parse_failure", reask_on_parse_failure}};
  if (kind == BackendKind::Http) j["endpoint"] = endpoint;
  if (kind == BackendKind::Mock) {
    j["policy"] = to_string(policy);
    j["seed"] = seed;
    if (policy == MockPolicy::FixedLabel) j["fixed_label"] = fixed_label.encode();
    if (epsilon) j["epsilon"] = *epsilon;
  }
  return j;
}

BackendResponse Backend::complete(const BackendRequest& request) {
  ++calls_;
  return do_complete(request);
}

// Mock backend.

MockBackend::MockBackend(BackendDescriptor descriptor) : d_(std::move(descriptor)) { d_.validate(); }

std::string MockBackend::model_id() const {
  std::string id = d_.model_id + ":" + std::string(to_string(d_.policy));
  if (d_.policy == MockPolicy::FixedLabel) id += ":" + d_.fixed_label.encode();
  if (d_.policy == MockPolicy::Noisy) {
    id += d_.epsilon ? ":eps=" + json(*d_.epsilon).dump() : std::string(":eps=schedule");
    id += ":seed=" + std::to_string(d_.seed);
  }
  return id;
}

namespace {

// Two independent uniforms from a digest of (seed, image id).
std::pair<double, std::uint64_t> keyed_draws(std::uint64_t seed, const std::string& key) {
  const std::string hex = sha256_hex(std::to_string(seed) + "|" + key);
  const std::uint64_t a = std::stoull(hex.substr(0, 16), nullptr, 16);
  const std::uint64_t b = std::stoull(hex.substr(16, 16), nullptr, 16);
  return {static_cast<double>(a >> 11) * 0x1.0p-53, b};
}

}  // namespace

BackendResponse MockBackend::do_complete(const BackendRequest& request) {
  DistortionLabel label;
  switch (d_.policy) {
    case MockPolicy::GroundTruth:
    case MockPolicy::Noisy:
      if (!request.truth) throw Error(ErrorCode::ConfigError, "mock policy needs the ground-truth label");
      label = *request.truth;
      break;
    case MockPolicy::EchoPrior:
      if (!request.soft) throw Error(ErrorCode::ConfigError, "echo_prior mock needs prior distributions");
      label = prior::hard_label(*request.soft, 0.5);
      break;
    case MockPolicy::FixedLabel: label = d_.fixed_label; break;
  }
  if (d_.policy == MockPolicy::Noisy) {
    const double eps = d_.epsilon.value_or(noisy_epsilon_for(request.context_size));
    const std::string key =
        request.image_id.empty() && request.prompt ? sha256_hex(request.prompt->serialize()) : request.image_id;
    // The same uniform decides corruption at every epsilon, so a lower rate
    // corrupts a subset of the images a higher rate corrupts.
    const auto [u, pick] = keyed_draws(d_.seed, key);
    if (u < eps) {
      static const std::vector<DistortionLabel> all = enumerate_valid_labels();
      std::vector<const DistortionLabel*> others;
      for (const auto& l : all) {
        if (!(l == label)) others.push_back(&l);
      }
      label = *others[pick % others.size()];
    }
  }
  BackendResponse r;
  const bool cot = request.prompt && request.prompt->mode == Mode::Cot;
  if (cot) {
    r.text = "1. Mock " + std::string(to_string(d_.policy)) + " policy decision for " +
             (label.empty() ? std::string("a clean frame") : label.encode()) + ".\n";
  }
  r.text += answer_json(label);
  return r;
}

// HTTP backend.

struct HttpBackend::Limiter {
  explicit Limiter(int n) : slots(std::clamp(n, 1, 1024)) {}
  std::counting_semaphore<1024> slots;
};

HttpBackend::HttpBackend(BackendDescriptor descriptor)
    : d_(std::move(descriptor)), limiter_(std::make_unique<Limiter>(d_.max_in_flight)) {
  d_.validate();
}

HttpBackend::~HttpBackend() = default;

json HttpBackend::request_body(const PromptDocument& prompt) const {
  json content = json::array();
  for (const auto& p : prompt.parts) {
    if (p.kind == PromptPart::Kind::Text) {
      content.push_back({{"type", "text"}, {"text", p.content}});
    } else {
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + p.content}}}});
    }
  }
  json body = {{"model", d_.model_id},
               {"messages", json::array({{{"role", "user"}, {"content", content}}})},
               {"temperature", 0.0}};
  for (const auto& [k, v] : d_.options.items()) body[k] = v;
  return body;
}

namespace {

BackendResponse parse_completion(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseFailure, "backend body is not JSON", body);
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    BackendResponse r;
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") r.text += part.at("text").get<std::string>();
      }
    }
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      if (u.contains("prompt_tokens")) r.prompt_tokens = u["prompt_tokens"].get<int>();
      if (u.contains("completion_tokens")) r.completion_tokens = u["completion_tokens"].get<int>();
    }
    return r;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseFailure, std::string("backend body: ") + ex.what(), body);
  }
}

}  // namespace

BackendResponse HttpBackend::do_complete(const BackendRequest& request) {
  if (!request.prompt) throw Error(ErrorCode::InvalidArgument, "http request without a prompt");
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(d_.endpoint, m, url)) throw Error(ErrorCode::ConfigError, "bad endpoint " + d_.endpoint);
  const std::string base = m[1].str();
  const std::string path = m[2].matched ? m[2].str() : "/v1/chat/completions";
  const std::string payload = request_body(*request.prompt).dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(d_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  limiter_->slots.acquire();
  struct Release {
    Limiter* l;
    ~Release() { l->slots.release(); }
  } release{limiter_.get()};

  const auto timeout = std::chrono::duration<double>(d_.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  std::string last_body;
  bool last_was_transport = false;
  int last_status = 0;
  for (int attempt = 0; attempt <= d_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(d_.backoff_ms) << (attempt - 1)));
    }
    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_us);
    cli.set_read_timeout(timeout_us);
    cli.set_write_timeout(timeout_us);
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      last_was_transport = true;
      last_body = httplib::to_string(res.error());
      continue;
    }
    last_was_transport = false;
    last_status = res->status;
    last_body = res->body;
    if (res->status >= 200 && res->status < 300) return parse_completion(res->body);
  }
  if (last_was_transport) {
    throw Error(ErrorCode::BackendTimeout, "no response from " + d_.endpoint + " after retries", last_body);
  }
  throw Error(ErrorCode::BackendRefusal, "status " + std::to_string(last_status) + " after retries", last_body);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
  if (descriptor.kind == BackendKind::Http) return std::make_unique<HttpBackend>(descriptor);
  return std::make_unique<MockBackend>(descriptor);
}

}  // namespace endoagent::agent
