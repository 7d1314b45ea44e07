#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "endoagent/label.hpp"
#include "endoagent/manifest.hpp"

namespace endoagent {

/// One piece of a multimodal prompt. Image parts carry a PNG Base64 payload.
struct PromptPart {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string content;

  friend bool operator==(const PromptPart&, const PromptPart&) = default;
};

}  // namespace endoagent

namespace endoagent::context {

struct ContextConfig {
  int k = 15;
  int n_single = 8;
  int n_composite = 7;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless n_single + n_composite == k, all >= 0.
  void validate() const;

  static ContextConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  friend bool operator==(const ContextConfig&, const ContextConfig&) = default;
};

struct Exemplar {
  std::string id;
  DistortionLabel label;
};

struct FewShotContext {
  std::vector<Exemplar> exemplars;

  std::size_t size() const { return exemplars.size(); }
};

/// Draws n_single single-category and n_composite multi-category exemplars
/// from the train split. Classes are visited round-robin so every class is
/// used once before any repeats. Singles come first, then composites, each
/// group in seeded shuffled order. Throws InsufficientExemplars.
FewShotContext build_context(const DatasetManifest& manifest, const ContextConfig& config);

/// Image block then label text per exemplar. Throws MissingImage when an id
/// is not in the manifest or its file cannot be read.
std::vector<PromptPart> render_context(const FewShotContext& ctx, const DatasetManifest& manifest);

}  // namespace endoagent::context
