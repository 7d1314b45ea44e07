#include "endoagent/label.hpp"

#include <algorithm>

#include "endoagent/error.hpp"

namespace endoagent {

std::string_view to_token(Category c) noexcept {
  switch (c) {
    case Category::Smoke: return "smoke";
    case Category::MotionBlur: return "motion_blur";
    case Category::OverExposure: return "over_exposure";
    case Category::LowLight: return "low_light";
  }
  return "";
}

std::string_view to_token(Severity s) noexcept {
  switch (s) {
    case Severity::Normal: return "normal";
    case Severity::Mild: return "mild";
    case Severity::Severe: return "severe";
  }
  return "";
}

std::optional<Category> parse_category(std::string_view token) noexcept {
  for (Category c : kCategories) {
    if (to_token(c) == token) return c;
  }
  return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view token) noexcept {
  for (Severity s : {Severity::Normal, Severity::Mild, Severity::Severe}) {
    if (to_token(s) == token) return s;
  }
  return std::nullopt;
}

std::optional<std::string> DistortionLabel::check(const std::vector<LabelEntry>& entries) {
  if (entries.size() > 3) return "more than three distortion entries";
  bool seen[kCategoryCount] = {false, false, false, false};
  for (const auto& e : entries) {
    if (seen[index_of(e.category)]) {
      return "duplicate category " + std::string(to_token(e.category));
    }
    seen[index_of(e.category)] = true;
    if (e.severity == Severity::Normal) {
      return "entry " + std::string(to_token(e.category)) + " carries severity normal";
    }
    if (e.category == Category::Smoke && e.severity != Severity::Severe) {
      return "smoke must be severe";
    }
  }
  if (seen[index_of(Category::LowLight)] && seen[index_of(Category::OverExposure)]) {
    return "low_light and over_exposure are mutually exclusive";
  }
  return std::nullopt;
}

DistortionLabel DistortionLabel::make(std::vector<LabelEntry> entries) {
  if (auto problem = check(entries)) throw Error(ErrorCode::InvariantViolation, *problem);
  std::sort(entries.begin(), entries.end(), [](const LabelEntry& a, const LabelEntry& b) {
    return index_of(a.category) < index_of(b.category);
  });
  DistortionLabel label;
  label.entries_ = std::move(entries);
  return label;
}

bool DistortionLabel::contains(Category c) const noexcept {
  return severity_of(c) != Severity::Normal;
}

Severity DistortionLabel::severity_of(Category c) const noexcept {
  for (const auto& e : entries_) {
    if (e.category == c) return e.severity;
  }
  return Severity::Normal;
}

std::string DistortionLabel::encode() const {
  if (entries_.empty()) return "normal";
  std::string out;
  for (const auto& e : entries_) {
    if (!out.empty()) out += '+';
    out += to_token(e.category);
    out += ':';
    out += to_token(e.severity);
  }
  return out;
}

DistortionLabel DistortionLabel::decode(std::string_view text) {
  if (text == "normal") return {};
  if (text.empty()) throw Error(ErrorCode::ParseError, "empty label string");
  std::vector<LabelEntry> entries;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('+', start), text.size());
    const std::string_view token = text.substr(start, end - start);
    const std::size_t colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "label token without ':' -> " + std::string(token));
    }
    const auto category = parse_category(token.substr(0, colon));
    const auto severity = parse_severity(token.substr(colon + 1));
    if (!category || !severity) {
      throw Error(ErrorCode::ParseError, "unknown label token " + std::string(token));
    }
    entries.push_back({*category, *severity});
    start = end + 1;
  }
  return make(std::move(entries));
}

std::vector<DistortionLabel> enumerate_valid_labels() {
  std::vector<DistortionLabel> out;
  for (int code = 0; code < 81; ++code) {
    std::vector<LabelEntry> entries;
    int rest = code;
    for (Category c : kCategories) {
      const auto s = static_cast<Severity>(rest % 3);
      rest /= 3;
      if (s != Severity::Normal) entries.push_back({c, s});
    }
    if (!DistortionLabel::check(entries)) out.push_back(DistortionLabel::make(std::move(entries)));
  }
  std::stable_sort(out.begin(), out.end(), [](const DistortionLabel& a, const DistortionLabel& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.encode() < b.encode();
  });
  return out;
}

}  // namespace endoagent
