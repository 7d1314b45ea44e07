#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace endoagent {

/// Declaration order is the canonical order, which is also the order
/// enhancers are chained in.
enum class Category { Smoke = 0, MotionBlur = 1, OverExposure = 2, LowLight = 3 };
enum class Severity { Normal = 0, Mild = 1, Severe = 2 };

inline constexpr std::array<Category, 4> kCategories = {
    Category::Smoke, Category::MotionBlur, Category::OverExposure, Category::LowLight};
inline constexpr int kCategoryCount = 4;

inline constexpr int index_of(Category c) noexcept { return static_cast<int>(c); }

std::string_view to_token(Category c) noexcept;
std::string_view to_token(Severity s) noexcept;
std::optional<Category> parse_category(std::string_view token) noexcept;
std::optional<Severity> parse_severity(std::string_view token) noexcept;

struct LabelEntry {
  Category category;
  Severity severity;
  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// A set of (category, severity) pairs. Construction through `make` enforces
/// every invariant; entries are stored sorted in canonical order.
class DistortionLabel {
 public:
  DistortionLabel() = default;

  /// Throws InvariantViolation for duplicates, Normal entries, LowLight with
  /// OverExposure, non-severe Smoke, or more than three entries.
  static DistortionLabel make(std::vector<LabelEntry> entries);
  /// Returns the violated rule, or nullopt when the entries form a valid label.
  static std::optional<std::string> check(const std::vector<LabelEntry>& entries);

  const std::vector<LabelEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(Category c) const noexcept;
  Severity severity_of(Category c) const noexcept;

  std::string encode() const;
  /// Throws ParseError on unknown tokens and InvariantViolation on rule breaks.
  static DistortionLabel decode(std::string_view text);

  friend bool operator==(const DistortionLabel&, const DistortionLabel&) = default;

 private:
  std::vector<LabelEntry> entries_;
};

/// Every valid label, ordered by size and then lexicographically by entries.
std::vector<DistortionLabel> enumerate_valid_labels();

}  // namespace endoagent
