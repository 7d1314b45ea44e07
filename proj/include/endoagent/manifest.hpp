#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "endoagent/label.hpp"

namespace endoagent {

enum class Split { Train, Test };

struct ManifestEntry {
  std::string id;
  std::optional<std::string> clean_path;
  std::string distorted_path;
  DistortionLabel label;
  Split split = Split::Train;

  bool paired() const noexcept { return clean_path.has_value(); }
};

/// Ordered list of dataset entries. Paths are stored exactly as written in the
/// file; `resolve` interprets relative paths against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  const ManifestEntry* find(const std::string& id) const;
  std::vector<const ManifestEntry*> split(Split s) const;

  /// Throws InvariantViolation when ids are not unique.
  void validate() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
/// Deterministic serialization: one top-level array, stable key order.
std::string manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest manifest_from_json(const std::string& text, std::filesystem::path base_dir = {});

std::string_view to_string(Split s) noexcept;

}  // namespace endoagent
