#include <doctest.h>

#include <sstream>

#include "endoagent/harness.hpp"
#include "endoagent/prior.hpp"
#include "support.hpp"

using namespace endoagent;
using namespace endoagent::harness;
using nlohmann::json;
using endoagent::testing::code_of;
using endoagent::testing::slurp;
using endoagent::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Small benchmark plus a briefly trained prior, shared by every case.
struct Fixture {
  TempDir dir{"harness"};
  fs::path manifest;
  fs::path prior_path;

  explicit Fixture(double test_fraction = 0.4) {
    manifest = testing::make_benchmark(
        dir.path(), 40, 48, {{bench::Order::Single, 14}, {bench::Order::Second, 7}, {bench::Order::Third, 4}},
        test_fraction, 11);
    prior::TrainHyper hyper;
    hyper.epochs = 200;
    prior_path = dir / "prior.json";
    prior::save_model(prior::train_prior(read_manifest(manifest), hyper), prior_path);
  }

  RunConfig config(const std::string& out) const {
    RunConfig c;
    c.manifest = manifest;
    c.prior_model = prior_path;
    c.output_dir = dir / out;
    c.context = context::ContextConfig::from_json({{"k", 0}});
    c.no_reference_metrics = false;
    return c;
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> csv_cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  return out;
}

std::vector<std::string> md_cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string c;
  std::getline(in, c, '|');
  while (std::getline(in, c, '|')) {
    const auto a = c.find_first_not_of(' '), b = c.find_last_not_of(' ');
    out.push_back(a == std::string::npos ? "" : c.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("ground-truth agent run scores perfectly and improves PSNR") {
    Fixture f;
    const auto cfg = f.config("run");
    const auto summary = run_pipeline(cfg);
    const auto tests = read_manifest(f.manifest).split(Split::Test);
    REQUIRE(summary.total_records == tests.size());
    CHECK(summary.new_records == tests.size());
    CHECK(summary.backend_calls == tests.size());
    emit_report(cfg.output_dir);

    const auto cot = accuracy_from_records(cfg.output_dir, RunMode::AgentCot);
    for (auto m : {metrics::AccuracyMode::SeverityOnly, metrics::AccuracyMode::CategoryOnly,
                   metrics::AccuracyMode::Joint}) {
      CHECK(cot.row(m).overall == 1.0);
    }

    const auto summary_json = json::parse(slurp(cfg.output_dir / "reports" / "summary.json"));
    CHECK(summary_json["modes"]["agent_cot"]["joint"]["overall"] == 1.0);
    const auto prior_only = accuracy_from_records(cfg.output_dir, RunMode::PriorOnly);
    CHECK(summary_json["modes"]["prior_only"]["joint"]["overall"].get<double>() ==
          doctest::Approx(prior_only.row(metrics::AccuracyMode::Joint).overall));

    // Paired PSNR: distorted vs enhanced under the oracle label.
    const auto& met = summary_json["metrics"];
    CHECK(met["Enhanced (agent_cot)"][0].get<double>() > met["Distorted"][0].get<double>());

    // Every record carries its plan and a chained provenance.
    for (const auto& line : lines_of(slurp(cfg.output_dir / "records.jsonl"))) {
      const auto r = json::parse(line);
      const auto& cot_block = r["modes"]["agent_cot"];
      CHECK(cot_block["predicted"] == r["truth"]);
      CHECK(cot_block["plan"].size() == cot_block["provenance"].size());
      CHECK(r["baselines"].size() == 4);
    }
  }

  TEST_CASE("accuracy table layout and CSV/Markdown agreement") {
    Fixture f;
    const auto cfg = f.config("run");
    run_pipeline(cfg);
    emit_report(cfg.output_dir);
    const auto csv = lines_of(slurp(cfg.output_dir / "reports" / "accuracy.csv"));
    REQUIRE(csv.size() == 1 + 2 * 3);
    const auto header = csv_cells(csv[0]);
    REQUIRE(header.size() == 2 + 7 + 1);
    CHECK(header.back() == "Average");
    for (int i = 0; i < metrics::kGridColumns; ++i) CHECK(header[2 + i] == metrics::grid_column_name(i));

    std::vector<std::vector<std::string>> md_rows;
    for (const auto& l : lines_of(slurp(cfg.output_dir / "reports" / "accuracy.md"))) {
      if (l.rfind("| prior_only", 0) == 0 || l.rfind("| agent_cot", 0) == 0) md_rows.push_back(md_cells(l));
    }
    REQUIRE(md_rows.size() == 6);
    for (std::size_t r = 0; r < 6; ++r) CHECK(md_rows[r] == csv_cells(csv[r + 1]));

    // The CSV cells are the recomputed report rounded to 4 decimals.
    for (std::size_t r = 0; r < 6; ++r) {
      const auto cells = csv_cells(csv[r + 1]);
      const auto mode = cells[0] == "prior_only" ? RunMode::PriorOnly : RunMode::AgentCot;
      const auto report = accuracy_from_records(cfg.output_dir, mode);
      const auto& row = report.rows[r % 3];
      for (int i = 0; i < metrics::kGridColumns; ++i) {
        const auto& c = row.cells[static_cast<std::size_t>(i)];
        if (!c) {
          CHECK(cells[2 + i] == "-");
          continue;
        }
        CHECK(std::abs(std::stod(cells[2 + i]) - *c) <= 5e-5);
      }
    }
  }

  TEST_CASE("warm cache rerun is byte identical with zero backend calls") {
    Fixture f;
    auto a = f.config("a");
    auto b = f.config("b");
    b.cache_dir = a.effective_cache_dir();
    run_pipeline(a);
    emit_report(a.output_dir);
    const auto second = run_pipeline(b);
    emit_report(b.output_dir);
    CHECK(second.backend_calls == 0);
    CHECK(slurp(a.output_dir / "records.jsonl") == slurp(b.output_dir / "records.jsonl"));
    for (const char* name : {"accuracy.md", "accuracy.csv", "metrics.md", "metrics.csv", "summary.json"}) {
      CHECK(slurp(a.output_dir / "reports" / name) == slurp(b.output_dir / "reports" / name));
    }
    CHECK(config_hash(a) == config_hash(b));
  }

  TEST_CASE("resume after a torn write keeps finished records") {
    Fixture f;
    const auto cfg = f.config("run");
    run_pipeline(cfg);
    const fs::path records = cfg.output_dir / "records.jsonl";
    const std::string full = slurp(records);
    const auto lines = lines_of(full);
    REQUIRE(lines.size() >= 3);

    // Keep all but the last two records, then half of the next one.
    std::string torn;
    for (std::size_t i = 0; i + 2 < lines.size(); ++i) torn += lines[i] + "\n";
    const std::string kept = torn;
    torn += lines[lines.size() - 2].substr(0, lines[lines.size() - 2].size() / 2);
    std::ofstream(records, std::ios::binary | std::ios::trunc) << torn;

    const auto again = run_pipeline(cfg);
    CHECK(again.new_records == 2);
    const std::string resumed = slurp(records);
    CHECK(resumed.compare(0, kept.size(), kept) == 0);
    CHECK(resumed == full);

    // Complete run: nothing left to do.
    CHECK(run_pipeline(cfg).new_records == 0);
  }

  TEST_CASE("run directory of another config is refused") {
    Fixture f;
    auto cfg = f.config("run");
    run_pipeline(cfg);
    cfg.seed = 99;
    CHECK(code_of([&] { run_pipeline(cfg); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("incomplete runs cannot be reported") {
    Fixture f(0.0);
    const auto cfg = f.config("run");
    CHECK(run_pipeline(cfg).total_records == 0);
    CHECK(code_of([&] { emit_report(cfg.output_dir); }) == ErrorCode::IncompleteRun);
    TempDir empty("norun");
    CHECK(code_of([&] { emit_report(empty.path()); }) == ErrorCode::IncompleteRun);
  }

  TEST_CASE("missing inputs are config errors") {
    Fixture f;
    auto cfg = f.config("run");
    cfg.prior_model = f.dir / "absent.json";
    CHECK(code_of([&] { run_pipeline(cfg); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("config json round trip and hash sensitivity") {
    Fixture f;
    const auto cfg = f.config("run");
    const auto back = RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(config_hash(back) == config_hash(cfg));
    auto other = cfg;
    other.output_dir = f.dir / "elsewhere";
    other.max_parallel = 4;
    CHECK(config_hash(other) == config_hash(cfg));
    other.context = context::ContextConfig::from_json({{"k", 2}});
    CHECK(config_hash(other) != config_hash(cfg));
  }

  TEST_CASE("parallel run writes records in manifest order") {
    Fixture f;
    auto serial = f.config("serial");
    auto parallel = f.config("parallel");
    parallel.max_parallel = 4;
    run_pipeline(serial);
    run_pipeline(parallel);
    CHECK(slurp(serial.output_dir / "records.jsonl") == slurp(parallel.output_dir / "records.jsonl"));
  }

  TEST_CASE("no-reference metrics are fitted once and reused") {
    Fixture f;
    auto cfg = f.config("run");
    cfg.no_reference_metrics = true;
    run_pipeline(cfg);
    CHECK(fs::exists(cfg.output_dir / "brisque_model.json"));
    const auto r = json::parse(lines_of(slurp(cfg.output_dir / "records.jsonl")).front());
    CHECK(r["distorted"].contains("brisque"));
  }

  TEST_CASE("ablation columns follow input order") {
    Fixture f;
    auto base = f.config("abl");
    base.modes = {RunMode::AgentCot};
    base.backend.policy = agent::MockPolicy::Noisy;
    base.baselines = false;
    const auto k0 = context::ContextConfig::from_json({{"k", 0}});
    const auto k4 = context::ContextConfig::from_json({{"k", 4}, {"single", 2}, {"composite", 2}});
    const auto result = ablation_sweep(base, {k4, k0, k4});
    REQUIRE(result.run_dirs.size() == 3);
    const auto csv = lines_of(slurp(base.output_dir / "reports" / "ablation.csv"));
    REQUIRE(csv.size() == 4);
    const auto header = csv_cells(csv[0]);
    REQUIRE(header.size() == 5);
    CHECK(header[2] == "k=4 (2/2)");
    CHECK(header[3] == "k=0 (0/0)");
    CHECK(header[4] == "k=4 (2/2)");
    for (std::size_t r = 1; r < csv.size(); ++r) {
      const auto cells = csv_cells(csv[r]);
      CHECK(cells[2] == cells[4]);
    }
    CHECK(code_of([&] { ablation_sweep(base, {k0}); }) == ErrorCode::ConfigError);
  }
}
