#include <algorithm>
#include <map>
#include <random>

#include "endoagent/context.hpp"
#include "endoagent/encoding.hpp"
#include "endoagent/error.hpp"
#include "endoagent/image_io.hpp"

namespace endoagent::context {

void ContextConfig::validate() const {
  if (k < 0 || n_single < 0 || n_composite < 0 || n_single + n_composite != k) {
    throw Error(ErrorCode::InvalidArgument, "context needs single + composite == k, all >= 0");
  }
}

ContextConfig ContextConfig::from_json(const nlohmann::json& j) {
  ContextConfig c;
  try {
    c.k = j.value("k", c.k);
    if (j.contains("single") || j.contains("composite")) {
      c.n_single = j.value("single", 0);
      c.n_composite = j.value("composite", 0);
    } else if (c.k != 15) {
      // Only k given: split as evenly as possible, singles first.
      c.n_single = (c.k + 1) / 2;
      c.n_composite = c.k / 2;
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("context config: ") + ex.what());
  }
  c.validate();
  return c;
}

nlohmann::json ContextConfig::to_json() const {
  return {{"k", k}, {"single", n_single}, {"composite", n_composite}, {"seed", seed}};
}

namespace {

using Rng = std::mt19937_64;

std::vector<Exemplar> draw_round_robin(std::vector<const ManifestEntry*> pool, int n, Rng& rng,
                                       const char* group) {
  if (n == 0) return {};
  if (static_cast<int>(pool.size()) < n) {
    throw Error(ErrorCode::InsufficientExemplars,
                std::string("need ") + std::to_string(n) + " " + group + " exemplars, train split has " +
                    std::to_string(pool.size()));
  }
  std::map<std::string, std::vector<const ManifestEntry*>> classes;
  for (const ManifestEntry* e : pool) classes[e->label.encode()].push_back(e);

  std::vector<std::vector<const ManifestEntry*>> buckets;
  for (auto& [key, members] : classes) {
    std::shuffle(members.begin(), members.end(), rng);
    buckets.push_back(std::move(members));
  }
  std::shuffle(buckets.begin(), buckets.end(), rng);

  std::vector<Exemplar> out;
  for (std::size_t round = 0; static_cast<int>(out.size()) < n; ++round) {
    for (const auto& bucket : buckets) {
      if (round < bucket.size() && static_cast<int>(out.size()) < n) {
        out.push_back({bucket[round]->id, bucket[round]->label});
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

FewShotContext build_context(const DatasetManifest& manifest, const ContextConfig& config) {
  config.validate();
  std::vector<const ManifestEntry*> singles, composites;
  for (const ManifestEntry* e : manifest.split(Split::Train)) {
    if (e->label.size() == 1) singles.push_back(e);
    if (e->label.size() >= 2) composites.push_back(e);
  }
  Rng rng(config.seed);
  FewShotContext ctx;
  ctx.exemplars = draw_round_robin(singles, config.n_single, rng, "single");
  auto comp = draw_round_robin(composites, config.n_composite, rng, "composite");
  ctx.exemplars.insert(ctx.exemplars.end(), comp.begin(), comp.end());
  return ctx;
}

std::vector<PromptPart> render_context(const FewShotContext& ctx, const DatasetManifest& manifest) {
  std::vector<PromptPart> parts;
  for (std::size_t i = 0; i < ctx.exemplars.size(); ++i) {
    const auto& ex = ctx.exemplars[i];
    const ManifestEntry* entry = manifest.find(ex.id);
    if (entry == nullptr) throw Error(ErrorCode::MissingImage, "exemplar " + ex.id + " not in manifest");
    ImageBuf img;
    try {
      img = load_image(manifest.resolve(entry->distorted_path));
    } catch (const Error& err) {
      throw Error(ErrorCode::MissingImage, "exemplar " + ex.id + ": " + err.what());
    }
    parts.push_back({PromptPart::Kind::Text, "Example " + std::to_string(i + 1) + ":"});
    parts.push_back({PromptPart::Kind::Image, encode_image_base64(img)});
    parts.push_back({PromptPart::Kind::Text, "Label: " + ex.label.encode()});
  }
  return parts;
}

}  // namespace endoagent::context
