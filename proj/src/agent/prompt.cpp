#include <cstdio>

#include "endoagent/agent.hpp"
#include "endoagent/encoding.hpp"

namespace endoagent::agent {

namespace {

constexpr std::string_view kTaskInstructions =
    "You are assessing the visual quality of a surgical endoscopy frame.\n"
    "Identify which distortions are present. Categories: low_light, over_exposure, motion_blur, "
    "smoke. Severities: mild, severe. Smoke is always severe. low_light and over_exposure never "
    "occur together. A frame carries at most three distortions; a clean frame has none.\n"
    "Answer schema: {\"distortions\":[{\"category\":\"<category>\",\"severity\":\"<severity>\"}]}\n";

constexpr std::string_view kCotInstructions =
    "Reason step by step before answering. Write your reasoning as numbered steps (1., 2., ...), "
    "one observation per step, covering brightness, highlights, sharpness and haze. After the "
    "steps, give the final answer as exactly one JSON object in the answer schema.\n";

constexpr std::string_view kDirectInstructions =
    "Reply with exactly one JSON object in the answer schema and nothing else.\n";

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

PromptPart text(std::string s) { return {PromptPart::Kind::Text, std::move(s)}; }

}  // namespace

std::string_view to_string(Mode m) noexcept { return m == Mode::Cot ? "cot" : "direct"; }

std::string PromptDocument::serialize() const {
  std::string out;
  out += "mode=";
  out += to_string(mode);
  out += '\n';
  for (const auto& p : parts) {
    out += p.kind == PromptPart::Kind::Text ? "text " : "image ";
    out += std::to_string(p.content.size());
    out += '\n';
    out += p.content;
    out += '\n';
  }
  return out;
}

std::size_t PromptDocument::byte_size() const { return serialize().size(); }

std::string PromptDocument::text_only() const {
  std::string out;
  for (const auto& p : parts) out += p.kind == PromptPart::Kind::Text ? p.content : "[image]\n";
  return out;
}

std::string format_priors(const prior::SoftLabels& soft) {
  std::string out = "Prior model estimates (temperature-smoothed):\n";
  for (Category c : kCategories) {
    const auto& b = soft.at(c);
    out += "- ";
    out += to_token(c);
    out += ": present " + fixed4(b.presence[1]) + ", absent " + fixed4(b.presence[0]);
    out += "; if present, mild " + fixed4(b.severity[0]) + ", severe " + fixed4(b.severity[1]) + "\n";
  }
  return out;
}

PromptDocument assemble_prompt(const ImageBuf& img, const prior::SoftLabels& soft,
                               const std::vector<PromptPart>& context_parts, Mode mode) {
  PromptDocument doc;
  doc.mode = mode;
  doc.parts.push_back(text(std::string(kTaskInstructions)));
  if (!context_parts.empty()) {
    doc.parts.push_back(text("Labeled examples follow.\n"));
    doc.parts.insert(doc.parts.end(), context_parts.begin(), context_parts.end());
  }
  doc.parts.push_back(text(format_priors(soft)));
  doc.parts.push_back(text("Query image:\n"));
  doc.parts.push_back({PromptPart::Kind::Image, encode_image_base64(img)});
  doc.parts.push_back(text(std::string(mode == Mode::Cot ? kCotInstructions : kDirectInstructions)));
  return doc;
}

PromptDocument assemble_prompt(const ImageBuf& img, const prior::SoftLabels& soft,
                               const context::FewShotContext& ctx, const DatasetManifest& manifest,
                               Mode mode) {
  return assemble_prompt(img, soft, context::render_context(ctx, manifest), mode);
}

}  // namespace endoagent::agent
