#include <regex>

#include "endoagent/agent.hpp"
#include "endoagent/error.hpp"

namespace endoagent::agent {

using nlohmann::json;

namespace {

struct Candidate {
  std::size_t begin;
  json value;
};

// Finds every balanced top-level {...} span that parses as a JSON object.
std::vector<Candidate> json_objects(std::string_view s) {
  std::vector<Candidate> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false, escaped = false;
    std::size_t j = i;
    for (; j < s.size(); ++j) {
      const char c = s[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        break;
      }
    }
    if (j >= s.size()) break;  // unbalanced tail
    json v = json::parse(s.substr(i, j - i + 1), nullptr, false);
    if (!v.is_discarded() && v.is_object()) {
      out.push_back({i, std::move(v)});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

ReasoningTrace collect_trace(std::string_view prose) {
  static const std::regex numbered(R"(^\s*(?:step\s*)?\d+\s*[.):]\s*(.*\S)\s*$)", std::regex::icase);
  ReasoningTrace numbered_steps, lines;
  std::size_t pos = 0;
  while (pos <= prose.size()) {
    const auto nl = prose.find('\n', pos);
    const std::string line(prose.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    std::smatch m;
    if (std::regex_match(line, m, numbered)) {
      numbered_steps.steps.push_back(m[1].str());
    } else if (auto t = trim(line); !t.empty() && t.rfind("```", 0) != 0) {
      lines.steps.push_back(std::move(t));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return numbered_steps.steps.empty() ? lines : numbered_steps;
}

}  // namespace

std::pair<DistortionLabel, ReasoningTrace> parse_prediction(std::string_view raw, Mode mode) {
  const std::string raw_copy(raw);
  std::vector<Candidate> answers;
  for (auto& c : json_objects(raw)) {
    if (c.value.contains("distortions")) answers.push_back(std::move(c));
  }
  if (answers.empty()) throw Error(ErrorCode::ParseFailure, "no JSON answer object", raw_copy);
  if (answers.size() > 1) throw Error(ErrorCode::ParseFailure, "more than one JSON answer object", raw_copy);

  const json& list = answers.front().value.at("distortions");
  if (!list.is_array()) throw Error(ErrorCode::ParseFailure, "\"distortions\" is not an array", raw_copy);
  std::vector<LabelEntry> entries;
  for (const auto& item : list) {
    if (!item.is_object() || !item.contains("category") || !item.contains("severity") ||
        !item["category"].is_string() || !item["severity"].is_string()) {
      throw Error(ErrorCode::ParseFailure, "distortion entry does not match the schema", raw_copy);
    }
    const auto c = parse_category(item["category"].get<std::string>());
    const auto s = parse_severity(item["severity"].get<std::string>());
    if (!c || !s || *s == Severity::Normal) {
      throw Error(ErrorCode::ParseFailure, "unknown category or severity in " + item.dump(), raw_copy);
    }
    entries.push_back({*c, *s});
  }
  if (auto violation = DistortionLabel::check(entries)) {
    throw Error(ErrorCode::InvariantViolation, *violation, raw_copy);
  }

  ReasoningTrace trace = collect_trace(raw.substr(0, answers.front().begin));
  if (mode == Mode::Cot && trace.steps.empty()) {
    throw Error(ErrorCode::ParseFailure, "chain-of-thought answer without reasoning steps", raw_copy);
  }
  return {DistortionLabel::make(std::move(entries)), std::move(trace)};
}

std::string answer_json(const DistortionLabel& label) {
  json list = json::array();
  for (const auto& e : label.entries()) {
    list.push_back({{"category", to_token(e.category)}, {"severity", to_token(e.severity)}});
  }
  return json{{"distortions", list}}.dump();
}

}  // namespace endoagent::agent
