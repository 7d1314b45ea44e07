#include "endoagent/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "endoagent/error.hpp"

namespace endoagent {

using nlohmann::ordered_json;

std::string_view to_string(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

const ManifestEntry* DatasetManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::InvariantViolation, "duplicate manifest id " + e.id);
    }
  }
}

namespace {

const std::set<std::string> kEntryKeys = {"id", "clean_path", "distorted_path", "label", "split"};

ManifestEntry entry_from_json(const ordered_json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "manifest entry is not an object");
  for (const auto& [key, _] : j.items()) {
    if (!kEntryKeys.contains(key)) throw Error(ErrorCode::ParseError, "unknown manifest key " + key);
  }
  for (const auto& key : kEntryKeys) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, "manifest entry missing " + key);
  }
  ManifestEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    if (!j.at("clean_path").is_null()) e.clean_path = j.at("clean_path").get<std::string>();
    e.distorted_path = j.at("distorted_path").get<std::string>();
    e.label = DistortionLabel::decode(j.at("label").get<std::string>());
    const auto split = j.at("split").get<std::string>();
    if (split == "train") {
      e.split = Split::Train;
    } else if (split == "test") {
      e.split = Split::Test;
    } else {
      throw Error(ErrorCode::ParseError, "unknown split " + split);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("manifest entry: ") + ex.what());
  }
  return e;
}

}  // namespace

DatasetManifest manifest_from_json(const std::string& text, std::filesystem::path base_dir) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + ex.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "manifest must be a top-level array");
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  for (const auto& item : doc) m.entries.push_back(entry_from_json(item));
  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), path.parent_path());
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  ordered_json doc = ordered_json::array();
  for (const auto& e : manifest.entries) {
    ordered_json j;
    j["id"] = e.id;
    j["clean_path"] = e.clean_path ? ordered_json(*e.clean_path) : ordered_json(nullptr);
    j["distorted_path"] = e.distorted_path;
    j["label"] = e.label.encode();
    j["split"] = std::string(to_string(e.split));
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << manifest_to_json(manifest);
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace endoagent
