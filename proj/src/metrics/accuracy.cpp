#include <algorithm>

#include "endoagent/error.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::metrics {

std::string_view to_string(AccuracyMode m) noexcept {
  switch (m) {
    case AccuracyMode::SeverityOnly: return "severity_only";
    case AccuracyMode::CategoryOnly: return "category_only";
    case AccuracyMode::Joint: return "joint";
  }
  return "?";
}

std::array<LabelEntry, kGridColumns> grid_columns() {
  return {{{Category::LowLight, Severity::Mild},
           {Category::OverExposure, Severity::Mild},
           {Category::MotionBlur, Severity::Mild},
           {Category::LowLight, Severity::Severe},
           {Category::OverExposure, Severity::Severe},
           {Category::MotionBlur, Severity::Severe},
           {Category::Smoke, Severity::Severe}}};
}

std::string_view grid_column_name(int i) {
  static constexpr std::array<std::string_view, kGridColumns> names = {
      "Mild Low", "Mild Over", "Mild Blur", "Severe Low", "Severe Over", "Severe Blur", "Severe Smoke"};
  if (i < 0 || i >= kGridColumns) throw Error(ErrorCode::InvalidArgument, "grid column out of range");
  return names[static_cast<std::size_t>(i)];
}

bool is_correct(const std::optional<DistortionLabel>& predicted, const DistortionLabel& truth,
                AccuracyMode mode) {
  if (!predicted) return false;
  switch (mode) {
    case AccuracyMode::Joint: return *predicted == truth;
    case AccuracyMode::CategoryOnly: {
      if (predicted->size() != truth.size()) return false;
      for (const auto& e : truth.entries()) {
        if (!predicted->contains(e.category)) return false;
      }
      return true;
    }
    case AccuracyMode::SeverityOnly: {
      std::vector<Severity> a, b;
      for (const auto& e : predicted->entries()) a.push_back(e.severity);
      for (const auto& e : truth.entries()) b.push_back(e.severity);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      return a == b;
    }
  }
  return false;
}

AccuracyRow accuracy_row(std::span<const LabelPair> pairs, AccuracyMode mode) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "accuracy needs at least one prediction");
  AccuracyRow row;
  row.mode = mode;
  const auto columns = grid_columns();
  std::array<int, kGridColumns> hits{};
  int total_hits = 0;
  for (const auto& p : pairs) {
    const bool ok = is_correct(p.predicted, p.truth, mode);
    total_hits += ok ? 1 : 0;
    for (int i = 0; i < kGridColumns; ++i) {
      const auto& col = columns[static_cast<std::size_t>(i)];
      if (p.truth.severity_of(col.category) != col.severity) continue;
      ++row.counts[static_cast<std::size_t>(i)];
      hits[static_cast<std::size_t>(i)] += ok ? 1 : 0;
    }
  }
  double sum = 0.0;
  int populated = 0;
  for (int i = 0; i < kGridColumns; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (row.counts[idx] == 0) continue;
    row.cells[idx] = static_cast<double>(hits[idx]) / row.counts[idx];
    sum += *row.cells[idx];
    ++populated;
  }
  if (populated > 0) row.average = sum / populated;
  row.overall = static_cast<double>(total_hits) / static_cast<double>(pairs.size());
  return row;
}

AccuracyReport accuracy_report(std::span<const LabelPair> pairs) {
  AccuracyReport r;
  r.n_images = pairs.size();
  for (AccuracyMode m : {AccuracyMode::SeverityOnly, AccuracyMode::CategoryOnly, AccuracyMode::Joint}) {
    r.rows[static_cast<std::size_t>(m)] = accuracy_row(pairs, m);
  }
  return r;
}

}  // namespace endoagent::metrics
