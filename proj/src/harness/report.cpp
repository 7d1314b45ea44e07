#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "endoagent/error.hpp"
#include "endoagent/harness.hpp"

namespace endoagent::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fixed4(*v) : "-"; }

std::vector<json> load_records(const fs::path& run_dir) {
  std::ifstream in(run_dir / "records.jsonl");
  if (!in) throw Error(ErrorCode::IncompleteRun, "no records.jsonl in " + run_dir.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IncompleteRun, "torn record in " + run_dir.string());
    out.push_back(std::move(j));
  }
  return out;
}

json load_config(const fs::path& run_dir) {
  std::ifstream in(run_dir / "config.json");
  if (!in) throw Error(ErrorCode::IncompleteRun, "no config.json in " + run_dir.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IncompleteRun, "unreadable config.json");
  return j;
}

std::vector<RunMode> modes_of(const json& config) {
  std::vector<RunMode> modes;
  for (const auto& m : config.at("modes")) {
    if (auto mode = parse_run_mode(m.get<std::string>())) modes.push_back(*mode);
  }
  return modes;
}

std::vector<metrics::LabelPair> pairs_for(const std::vector<json>& records, RunMode mode) {
  std::vector<metrics::LabelPair> pairs;
  const std::string key(to_string(mode));
  for (const auto& r : records) {
    metrics::LabelPair p;
    p.truth = DistortionLabel::decode(r.at("truth").get<std::string>());
    if (r.contains("modes") && r["modes"].contains(key) && r["modes"][key]["predicted"].is_string()) {
      p.predicted = DistortionLabel::decode(r["modes"][key]["predicted"].get<std::string>());
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<json> complete_records(const fs::path& run_dir, const json& config) {
  std::vector<json> records = load_records(run_dir);
  if (records.empty()) throw Error(ErrorCode::IncompleteRun, "run has no test records");
  const fs::path manifest_path = config.value("manifest", std::string());
  if (!manifest_path.empty() && fs::exists(manifest_path)) {
    const auto expected = read_manifest(manifest_path).split(Split::Test).size();
    if (records.size() < expected) {
      throw Error(ErrorCode::IncompleteRun, std::to_string(records.size()) + " of " +
                                                std::to_string(expected) + " records present");
    }
  }
  return records;
}

std::string criterion_name(metrics::AccuracyMode m) {
  switch (m) {
    case metrics::AccuracyMode::SeverityOnly: return "Severity only";
    case metrics::AccuracyMode::CategoryOnly: return "Category only";
    case metrics::AccuracyMode::Joint: return "Joint";
  }
  return "?";
}

constexpr metrics::AccuracyMode kRows[] = {metrics::AccuracyMode::SeverityOnly,
                                           metrics::AccuracyMode::CategoryOnly,
                                           metrics::AccuracyMode::Joint};

// A table rendered once into Markdown and CSV from the same strings.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string markdown() const {
    std::string out = "|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
    out += "\n";
    for (const auto& r : rows) {
      out += "|";
      for (const auto& c : r) out += " " + c + " |";
      out += "\n";
    }
    return out;
  }

  std::string csv() const {
    auto line = [](const std::vector<std::string>& cells) {
      std::string s;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
        if (!quote) {
          s += cells[i];
          continue;
        }
        s += '"';
        for (char c : cells[i]) s += c == '"' ? std::string("\"\"") : std::string(1, c);
        s += '"';
      }
      return s + "\n";
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

void write_text(const fs::path& p, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  written.push_back(p);
}

struct Mean {
  double sum = 0.0;
  int n = 0;
  void add(const json& v) {
    if (v.is_number()) {
      sum += v.get<double>();
      ++n;
    }
  }
  std::optional<double> value() const { return n ? std::optional<double>(sum / n) : std::nullopt; }
};

// Means of one metric block over paired or unpaired records.
struct MetricRow {
  Mean psnr, ssim, niqe_p, brisque_p, niqe_u, brisque_u;
  void add(const json& block, bool paired) {
    if (!block.is_object()) return;
    if (paired) {
      psnr.add(block.value("psnr", json()));
      ssim.add(block.value("ssim", json()));
      niqe_p.add(block.value("niqe", json()));
      brisque_p.add(block.value("brisque", json()));
    } else {
      niqe_u.add(block.value("niqe", json()));
      brisque_u.add(block.value("brisque", json()));
    }
  }
  std::vector<std::optional<double>> values() const {
    return {psnr.value(), ssim.value(), niqe_p.value(), brisque_p.value(), niqe_u.value(), brisque_u.value()};
  }
};

}  // namespace

metrics::AccuracyReport accuracy_from_records(const fs::path& run_dir, RunMode mode) {
  const auto pairs = pairs_for(load_records(run_dir), mode);
  return metrics::accuracy_report(pairs);
}

std::vector<fs::path> emit_report(const fs::path& run_dir) {
  const json config = load_config(run_dir);
  const std::vector<json> records = complete_records(run_dir, config);
  const auto modes = modes_of(config);
  const fs::path out_dir = run_dir / "reports";
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  json summary = {{"n_images", records.size()}, {"modes", json::object()}};

  // Accuracy grid.
  Table acc;
  acc.header = {"Method", "Criterion"};
  for (int i = 0; i < metrics::kGridColumns; ++i) acc.header.emplace_back(metrics::grid_column_name(i));
  acc.header.emplace_back("Average");
  for (RunMode mode : modes) {
    const auto pairs = pairs_for(records, mode);
    const auto report = metrics::accuracy_report(pairs);
    json mode_summary = json::object();
    for (auto am : kRows) {
      const auto& row = report.row(am);
      std::vector<std::string> r = {std::string(to_string(mode)), criterion_name(am)};
      json cells = json::array();
      for (int i = 0; i < metrics::kGridColumns; ++i) {
        const auto& c = row.cells[static_cast<std::size_t>(i)];
        r.push_back(cell(c));
        cells.push_back(c ? json(*c) : json(nullptr));
      }
      r.push_back(cell(row.average));
      acc.rows.push_back(std::move(r));
      mode_summary[std::string(metrics::to_string(am))] = {
          {"cells", cells},
          {"counts", row.counts},
          {"average", row.average ? json(*row.average) : json(nullptr)},
          {"overall", row.overall}};
    }
    int failures = 0;
    for (const auto& p : pairs) failures += p.predicted ? 0 : 1;
    mode_summary["failed_predictions"] = failures;
    summary["modes"][std::string(to_string(mode))] = mode_summary;
  }
  std::string md = "# Classification accuracy\n\n" + std::to_string(records.size()) +
                   " test images. Cells cover images whose ground truth contains the column's "
                   "distortion; Average is the mean of populated cells.\n\n" + acc.markdown();
  md += "\nPer-image accuracy over all images:\n\n";
  for (RunMode mode : modes) {
    const auto& ms = summary["modes"][std::string(to_string(mode))];
    md += "- " + std::string(to_string(mode)) + ": severity only " +
          fixed4(ms["severity_only"]["overall"].get<double>()) + ", category only " +
          fixed4(ms["category_only"]["overall"].get<double>()) + ", joint " +
          fixed4(ms["joint"]["overall"].get<double>()) + "\n";
  }
  write_text(out_dir / "accuracy.md", md, written);
  write_text(out_dir / "accuracy.csv", acc.csv(), written);

  // Image-quality comparison.
  std::vector<std::pair<std::string, MetricRow>> metric_rows;
  metric_rows.emplace_back("Distorted", MetricRow{});
  for (RunMode mode : modes) metric_rows.emplace_back("Enhanced (" + std::string(to_string(mode)) + ")", MetricRow{});
  std::map<std::string, MetricRow> baselines;
  for (const auto& r : records) {
    if (r.contains("error")) continue;
    const bool paired = r.value("paired", false);
    metric_rows[0].second.add(r.value("distorted", json()), paired);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const std::string key(to_string(modes[m]));
      if (r["modes"].contains(key)) metric_rows[m + 1].second.add(r["modes"][key].value("enhanced", json()), paired);
    }
    if (r.contains("baselines")) {
      for (const auto& [id, block] : r["baselines"].items()) baselines[id].add(block, paired);
    }
  }
  for (auto& [id, row] : baselines) metric_rows.emplace_back("Single task: " + id, row);

  Table met;
  met.header = {"Method", "Images", "Paired PSNR", "Paired SSIM", "Paired NIQE", "Paired BRISQUE",
                "Unpaired NIQE", "Unpaired BRISQUE"};
  json metric_summary = json::object();
  std::size_t n_ok = 0;
  for (const auto& r : records) n_ok += r.contains("error") ? 0 : 1;
  for (const auto& [name, row] : metric_rows) {
    std::vector<std::string> cells = {name, std::to_string(n_ok)};
    json values = json::array();
    for (const auto& v : row.values()) {
      cells.push_back(cell(v));
      values.push_back(v ? json(*v) : json(nullptr));
    }
    met.rows.push_back(std::move(cells));
    metric_summary[name] = values;
  }
  summary["metrics"] = metric_summary;
  write_text(out_dir / "metrics.md",
             "# Image quality\n\nMeans over test images. PSNR/SSIM (higher is better) need a clean "
             "reference; NIQE/BRISQUE (lower is better) are fitted within this run. Failed "
             "predictions leave the image unenhanced.\n\n" + met.markdown(),
             written);
  write_text(out_dir / "metrics.csv", met.csv(), written);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n", written);
  return written;
}

std::vector<fs::path> emit_ablation_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw Error(ErrorCode::IncompleteRun, "no runs to compare");
  struct Column {
    std::string name;
    std::map<std::string, metrics::AccuracyReport> by_mode;
  };
  std::vector<Column> columns;
  std::vector<RunMode> agent_modes;
  for (const auto& dir : run_dirs) {
    const json config = load_config(dir);
    const auto records = complete_records(dir, config);
    const auto ctx = context::ContextConfig::from_json(config.at("context"));
    Column col;
    col.name = "k=" + std::to_string(ctx.k) + " (" + std::to_string(ctx.n_single) + "/" +
               std::to_string(ctx.n_composite) + ")";
    for (RunMode m : modes_of(config)) {
      if (m == RunMode::PriorOnly) continue;
      if (std::find(agent_modes.begin(), agent_modes.end(), m) == agent_modes.end()) agent_modes.push_back(m);
      col.by_mode.emplace(std::string(to_string(m)), metrics::accuracy_report(pairs_for(records, m)));
    }
    columns.push_back(std::move(col));
  }

  Table t;
  t.header = {"Method", "Criterion"};
  for (const auto& c : columns) t.header.push_back(c.name);
  json summary = json::array();
  for (RunMode m : agent_modes) {
    const std::string key(to_string(m));
    for (auto am : kRows) {
      std::vector<std::string> row = {key, criterion_name(am)};
      for (const auto& c : columns) {
        const auto it = c.by_mode.find(key);
        row.push_back(it == c.by_mode.end() ? "-" : cell(it->second.row(am).average));
      }
      t.rows.push_back(std::move(row));
    }
  }
  for (const auto& c : columns) {
    json col = {{"name", c.name}, {"modes", json::object()}};
    for (const auto& [key, report] : c.by_mode) {
      for (auto am : kRows) {
        const auto& row = report.row(am);
        col["modes"][key][std::string(metrics::to_string(am))] = {
            {"average", row.average ? json(*row.average) : json(nullptr)}, {"overall", row.overall}};
      }
    }
    summary.push_back(col);
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  write_text(out_dir / "ablation.md",
             "# Few-shot context ablation\n\nAverage accuracy over populated cells, one column per "
             "context setting (k exemplars, single/composite split).\n\n" + t.markdown(),
             written);
  write_text(out_dir / "ablation.csv", t.csv(), written);
  write_text(out_dir / "ablation.json", summary.dump(2) + "\n", written);
  return written;
}

}  // namespace endoagent::harness
