// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Tolerances and budgets are pinned below.

#define DOCTEST_CONFIG_DISABLE

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "endoagent/agent.hpp"
#include "endoagent/bench.hpp"
#include "endoagent/enhance.hpp"
#include "endoagent/harness.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/metrics.hpp"
#include "endoagent/prior.hpp"
#include "support.hpp"
#include "toy_prior.hpp"

using namespace endoagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kSoftmaxTol = 1e-12;
constexpr double kMetricOracleTol = 1e-6;
constexpr double kPsnrClosedFormTol = 1e-4;
constexpr double kGradientRelTol = 1e-5;
constexpr double kMinPsnrGainDb = 3.0;
constexpr double kMinCategoryAccuracy = 0.85;
constexpr double kMinJointAccuracy = 0.60;

constexpr double kBudgetSoftmaxS = 1.0;
constexpr double kBudgetRoutingS = 10.0;
constexpr double kBudgetPairedS = 300.0;
constexpr double kBudgetPriorS = 120.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

testing::TempDir& workdir() {
  static testing::TempDir dir("acceptance");
  return dir;
}

harness::RunConfig base_run(const fs::path& manifest, const fs::path& prior, const fs::path& out) {
  harness::RunConfig c;
  c.manifest = manifest;
  c.prior_model = prior;
  c.output_dir = out;
  c.context = context::ContextConfig::from_json({{"k", 0}});
  c.no_reference_metrics = false;
  c.baselines = false;
  return c;
}

fs::path untrained_prior() {
  const fs::path p = workdir() / "untrained_prior.json";
  if (!fs::exists(p)) prior::save_model(prior::PriorModel{}, p);
  return p;
}

double overall(const harness::RunConfig& c, harness::RunMode m, metrics::AccuracyMode am) {
  return harness::accuracy_from_records(c.output_dir, m).row(am).overall;
}

// 1. Tempered softmax: normalization, shift invariance, argmax invariance,
// strictly increasing entropy in T.
Outcome softmax_suite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> logit(0.0, 3.0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  const double temps[] = {0.5, 1.0, 1.1, 2.0};
  double worst_norm = 0, worst_shift = 0;
  int argmax_breaks = 0, entropy_breaks = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(2 + rng() % 9);
    for (double& v : z) v = logit(rng);
    const double c = shift(rng);
    std::vector<double> zs(z);
    for (double& v : zs) v += c;
    const auto top = std::max_element(z.begin(), z.end()) - z.begin();
    double prev_h = -1.0;
    for (double t : temps) {
      const auto p = prior::softmax_t(z, t);
      const auto ps = prior::softmax_t(zs, t);
      double sum = 0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        sum += p[k];
        worst_shift = std::max(worst_shift, std::abs(p[k] - ps[k]));
      }
      worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
      argmax_breaks += (std::max_element(p.begin(), p.end()) - p.begin()) != top;
      const double h = prior::entropy(p);
      entropy_breaks += !(h > prev_h);
      prev_h = h;
    }
  }
  const double s = seconds_since(start);
  return {worst_norm <= kSoftmaxTol && worst_shift <= kSoftmaxTol && argmax_breaks == 0 && entropy_breaks == 0 &&
              s < kBudgetSoftmaxS,
          fmt("norm err %.2e, shift err %.2e, argmax breaks %d, entropy breaks %d, %.3f s", worst_norm, worst_shift,
              argmax_breaks, entropy_breaks, s)};
}

// 2. Routing over every valid label, then a 50-image ground-truth run.
Outcome routing_oracle() {
  const auto root = workdir() / "routing";
  const auto manifest = testing::make_benchmark(
      root, 50, 64,
      {{bench::Order::Normal, 4}, {bench::Order::Single, 21}, {bench::Order::Second, 15}, {bench::Order::Third, 10}},
      1.0, 2);

  const auto start = Clock::now();
  const auto reg = enhance::EnhancerRegistry::defaults();
  int mismatches = 0;
  const auto labels = enumerate_valid_labels();
  for (const auto& l : labels) {
    const auto plan = agent::select_models(l, reg);
    const auto& entries = l.entries();
    bool ok = plan.steps.size() == entries.size();
    for (std::size_t i = 0; ok && i < entries.size(); ++i) {
      const auto* spec = reg.find(entries[i].category, entries[i].severity);
      ok = spec && plan.steps[i].category == entries[i].category && plan.steps[i].severity == entries[i].severity &&
           plan.steps[i].enhancer_id == spec->id;
    }
    mismatches += !ok;
  }

  auto cfg = base_run(manifest, untrained_prior(), root / "run");
  cfg.modes = {harness::RunMode::AgentCot};
  const auto summary = harness::run_pipeline(cfg);
  const double joint = overall(cfg, harness::RunMode::AgentCot, metrics::AccuracyMode::Joint);
  const double s = seconds_since(start);
  return {mismatches == 0 && labels.size() == 30 && summary.total_records == 50 && joint == 1.0 &&
              s < kBudgetRoutingS,
          fmt("%zu labels, %d routing mismatches, %zu images, joint %.4f, %.2f s", labels.size(), mismatches,
              summary.total_records, joint, s)};
}

// 3. PSNR/SSIM against the brute-force oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(3);
  double worst_psnr = 0, worst_ssim = 0;
  for (int i = 0; i < 50; ++i) {
    const auto a = testing::random_image(rng, 32, 32);
    // Correlated pairs keep SSIM away from zero.
    std::normal_distribution<double> noise(0.0, 0.05 + 0.01 * i);
    std::vector<double> v(a.data().begin(), a.data().end());
    for (double& x : v) x = x + noise(rng);
    const auto b = ImageBuf::from_unclamped(32, 32, std::move(v));
    worst_psnr = std::max(worst_psnr, std::abs(metrics::psnr(a, b) - testing::psnr_oracle(a, b)));
    worst_ssim = std::max(worst_ssim, std::abs(metrics::ssim(a, b) - testing::ssim_oracle(a, b)));
  }
  const double closed = metrics::psnr(ImageBuf::filled(16, 16, 0, 0, 0), ImageBuf::filled(16, 16, 0.5, 0.5, 0.5));
  const double closed_err = std::abs(closed - 6.0206);
  return {worst_psnr <= kMetricOracleTol && worst_ssim <= kMetricOracleTol && closed_err <= kPsnrClosedFormTol,
          fmt("psnr err %.2e, ssim err %.2e, closed form %.4f dB", worst_psnr, worst_ssim, closed)};
}

// 4. Analytic gradient vs central differences, toy prior train accuracy.
Outcome gradient_check() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    prior::LogisticHead h;
    for (auto& w : h.weights)
      for (double& v : w) v = n(rng);
    h.bias = {n(rng), n(rng)};
    std::vector<prior::FeatureVector> z(8);
    std::vector<int> y(8);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (double& v : z[i]) v = n(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    prior::LogisticHead g;
    prior::head_loss(h, z, y, 0.01, &g);
    auto rel = [](double num, double ana) { return std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3}); };
    for (int k = 0; k < 2; ++k) {
      for (int i = 0; i < prior::kFeatureCount; ++i) {
        worst = std::max(worst, rel(testing::numeric_partial(h, z, y, 0.01, &h.weights[k][i]), g.weights[k][i]));
      }
      worst = std::max(worst, rel(testing::numeric_partial(h, z, y, 0.01, &h.bias[k]), g.bias[k]));
    }
  }
  const auto toy = testing::make_toy(1);
  const auto model = prior::train_prior(toy.features, toy.labels, prior::TrainHyper{});
  int correct = 0;
  for (std::size_t i = 0; i < toy.features.size(); ++i) {
    correct += prior::hard_label(prior::prior_distributions(model, toy.features[i])) == toy.labels[i];
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(toy.features.size());
  return {worst <= kGradientRelTol && acc == 1.0, fmt("worst relative error %.2e, toy train accuracy %.4f", worst, acc)};
}

// 5. Single-distortion cells of a 200-image seed-7 benchmark, enhanced with
// the matching preset.
Outcome paired_improvement() {
  const auto start = Clock::now();
  const auto manifest_path =
      testing::make_benchmark(workdir() / "paired", 200, 128, {{bench::Order::Single, 200}}, 0.0, 7);
  const auto manifest = read_manifest(manifest_path);
  const auto reg = enhance::EnhancerRegistry::defaults();
  struct Cell {
    double psnr_d = 0, psnr_e = 0, ssim_d = 0, ssim_e = 0;
    int n = 0;
  };
  std::map<std::string, Cell> cells;
  for (const auto& e : manifest.entries) {
    const auto path = manifest.resolve(e.distorted_path);
    const auto distorted = load_image(path);
    const auto clean = load_image(manifest.resolve(*e.clean_path));
    const auto sidecar = bench::read_sidecar(path);
    const auto entry = e.label.entries().front();
    const auto enhanced =
        enhance::run_enhancer(distorted, *reg.find(entry.category, entry.severity), entry.severity, sidecar ? &*sidecar : nullptr);
    auto& c = cells[e.label.encode()];
    c.psnr_d += metrics::psnr(clean, distorted);
    c.psnr_e += metrics::psnr(clean, enhanced);
    c.ssim_d += metrics::ssim(clean, distorted);
    c.ssim_e += metrics::ssim(clean, enhanced);
    ++c.n;
  }
  bool ok = cells.size() == 7;
  std::string detail;
  for (const auto& [label, c] : cells) {
    const double gain = (c.psnr_e - c.psnr_d) / c.n;
    const double dssim = (c.ssim_e - c.ssim_d) / c.n;
    ok = ok && gain >= kMinPsnrGainDb && dssim > 0.0;
    detail += fmt("%s %+.2f dB/%+.4f; ", label.c_str(), gain, dssim);
  }
  const double s = seconds_since(start);
  ok = ok && s < kBudgetPairedS;
  return {ok, detail + fmt("%zu cells, %.1f s", cells.size(), s)};
}

// 6. Severe synthesis loses more PSNR than mild for each two-tier category.
Outcome degradation_monotonicity() {
  const bench::SynthesisParams params;
  std::string detail;
  bool ok = true;
  for (Category c : {Category::LowLight, Category::OverExposure, Category::MotionBlur}) {
    double mild = 0, severe = 0;
    const int n = 24;
    for (int i = 0; i < n; ++i) {
      const auto clean = bench::make_scene(128, 128, 600 + i);
      auto r1 = bench::entry_rng(6, i);
      auto r2 = bench::entry_rng(6, i);
      mild += metrics::psnr(clean, bench::compose_distortions(clean, DistortionLabel::make({{c, Severity::Mild}}), params, r1));
      severe +=
          metrics::psnr(clean, bench::compose_distortions(clean, DistortionLabel::make({{c, Severity::Severe}}), params, r2));
    }
    ok = ok && severe < mild;
    detail += fmt("%s mild %.2f / severe %.2f dB; ", std::string(to_token(c)).c_str(), mild / n, severe / n);
  }
  return {ok, detail + "24 images each"};
}

// Shared by 7-9: the 400-image desk benchmark for a seed.
fs::path desk_benchmark(std::uint64_t seed) {
  return testing::make_benchmark(
      workdir() / ("desk_" + std::to_string(seed)), 400, 128,
      {{bench::Order::Normal, 28}, {bench::Order::Single, 196}, {bench::Order::Second, 112}, {bench::Order::Third, 64}},
      0.25, seed);
}

fs::path desk_prior(std::uint64_t seed) { return workdir() / ("desk_" + std::to_string(seed)) / "prior.json"; }

// 7. Prior trained on 300 train images, scored on 100 held-out ones.
Outcome prior_accuracy() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {7u, 11u, 13u}) {
    const auto start = Clock::now();
    const auto manifest = read_manifest(desk_benchmark(seed));
    const auto model = prior::train_prior(manifest, prior::TrainHyper{});
    prior::save_model(model, desk_prior(seed));
    std::vector<metrics::LabelPair> pairs;
    for (const auto* e : manifest.split(Split::Test)) {
      const auto img = load_image(manifest.resolve(e->distorted_path));
      pairs.push_back({prior::hard_label(prior::prior_distributions(model, img)), e->label});
    }
    const auto report = metrics::accuracy_report(pairs);
    const double cat = report.row(metrics::AccuracyMode::CategoryOnly).overall;
    const double joint = report.row(metrics::AccuracyMode::Joint).overall;
    const double s = seconds_since(start);
    const std::size_t n_train = manifest.split(Split::Train).size();
    ok = ok && cat >= kMinCategoryAccuracy && joint >= kMinJointAccuracy && s < kBudgetPriorS;
    detail += fmt("seed %llu: %zu/%zu train/test, category %.3f, joint %.3f, %.1f s; ",
                  static_cast<unsigned long long>(seed), n_train, pairs.size(), cat, joint, s);
  }
  return {ok, detail + "3 seeds"};
}

// 8 and 9 share one ablation sweep on the seed-7 desk benchmark with the
// noisy mock: k=0 and k=15 (8/7), each scoring prior_only and agent_cot.
struct Sweep {
  harness::RunConfig k0, k15;
};

const Sweep& noisy_sweep() {
  static const Sweep sweep = [] {
    auto base = base_run(desk_benchmark(7), desk_prior(7), workdir() / "ablation");
    if (!fs::exists(base.prior_model)) {
      prior::save_model(prior::train_prior(read_manifest(base.manifest), prior::TrainHyper{}), base.prior_model);
    }
    base.modes = {harness::RunMode::PriorOnly, harness::RunMode::AgentCot};
    base.backend.policy = agent::MockPolicy::Noisy;
    base.backend.seed = 7;
    const auto k0 = context::ContextConfig::from_json({{"k", 0}, {"seed", 7}});
    const auto k15 = context::ContextConfig::from_json({{"k", 15}, {"single", 8}, {"composite", 7}, {"seed", 7}});
    const auto result = harness::ablation_sweep(base, {k0, k15});
    Sweep s{base, base};
    s.k0.output_dir = result.run_dirs[0];
    s.k0.context = k0;
    s.k15.output_dir = result.run_dirs[1];
    s.k15.context = k15;
    return s;
  }();
  return sweep;
}

Outcome agent_over_prior() {
  const auto& run = noisy_sweep().k15;
  const double agent = overall(run, harness::RunMode::AgentCot, metrics::AccuracyMode::Joint);
  const double prior_only = overall(run, harness::RunMode::PriorOnly, metrics::AccuracyMode::Joint);
  return {agent >= prior_only,
          fmt("k=15 noisy mock (epsilon %.2f): agent_cot joint %.3f vs prior_only joint %.3f",
              agent::noisy_epsilon_for(15), agent, prior_only)};
}

Outcome ablation_trend() {
  const auto& sweep = noisy_sweep();
  const double j0 = overall(sweep.k0, harness::RunMode::AgentCot, metrics::AccuracyMode::Joint);
  const double j15 = overall(sweep.k15, harness::RunMode::AgentCot, metrics::AccuracyMode::Joint);
  const auto csv = testing::slurp(sweep.k0.output_dir.parent_path() / "reports" / "ablation.csv");
  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  const bool grid = lines.size() == 4 && lines[0] == "Method,Criterion,k=0 (0/0),k=15 (8/7)" &&
                    lines[1].rfind("agent_cot,Severity only,", 0) == 0 &&
                    lines[2].rfind("agent_cot,Category only,", 0) == 0 && lines[3].rfind("agent_cot,Joint,", 0) == 0;
  return {j15 >= j0 && grid, fmt("joint k=0 %.3f, k=15 %.3f; grid rows %s", j0, j15, grid ? "ok" : "malformed")};
}

// 10. Two cold runs agree byte for byte; a third on the first's cache makes
// no backend calls.
Outcome determinism() {
  const auto root = workdir() / "determinism";
  const auto manifest = testing::make_benchmark(
      root, 90, 64,
      {{bench::Order::Normal, 6}, {bench::Order::Single, 42}, {bench::Order::Second, 24}, {bench::Order::Third, 16}},
      0.4, 10);
  const fs::path prior_path = root / "prior.json";
  prior::save_model(prior::train_prior(read_manifest(manifest), prior::TrainHyper{}), prior_path);

  auto make = [&](const std::string& name) {
    harness::RunConfig c;
    c.manifest = manifest;
    c.prior_model = prior_path;
    c.output_dir = root / name;
    c.modes = {harness::RunMode::PriorOnly, harness::RunMode::AgentDirect, harness::RunMode::AgentCot};
    c.backend.policy = agent::MockPolicy::Noisy;
    c.context = context::ContextConfig::from_json({{"k", 4}, {"single", 2}, {"composite", 2}});
    return c;
  };
  const auto a = make("a"), b = make("b");
  auto c = make("c");
  c.cache_dir = a.effective_cache_dir();
  const auto sa = harness::run_pipeline(a);
  const auto sb = harness::run_pipeline(b);
  const auto sc = harness::run_pipeline(c);
  for (const auto& dir : {a.output_dir, b.output_dir, c.output_dir}) harness::emit_report(dir);

  int diffs = 0;
  std::vector<std::string> files = {"records.jsonl"};
  for (const char* f : {"accuracy.md", "accuracy.csv", "metrics.md", "metrics.csv", "summary.json"}) {
    files.push_back(std::string("reports/") + f);
  }
  for (const auto& f : files) {
    const auto bytes = testing::slurp(a.output_dir / f);
    diffs += bytes.empty() || bytes != testing::slurp(b.output_dir / f) || bytes != testing::slurp(c.output_dir / f);
  }
  return {diffs == 0 && sa.backend_calls > 0 && sb.backend_calls == sa.backend_calls && sc.backend_calls == 0,
          fmt("%zu records, %d differing files of %zu, backend calls cold %zu/%zu, warm %zu", sa.total_records, diffs,
              files.size(), sa.backend_calls, sb.backend_calls, sc.backend_calls)};
}

// Malformed replies chosen by image id: unparseable text, schema breaks and
// labels that violate the label rules.
class CorruptingBackend : public agent::Backend {
 public:
  std::string model_id() const override { return "corrupting"; }

  static std::string corrupt(const std::string& image_id) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : image_id) h = (h ^ ch) * 1099511628211ull;
    std::mt19937_64 rng(h);
    static const std::vector<std::string> no_json = {
        "",
        "The image looks blurry and dark.",
        "{\"distortions\": [{\"category\": \"smoke\",",
        "```json\nnot json at all\n```",
        "Step 1: dark.\nStep 2: blurred.\nFinal answer: low light"};
    static const std::vector<std::string> schema = {
        "{\"distortions\": \"smoke\"}",
        "{\"labels\": []}",
        "[{\"category\": \"smoke\", \"severity\": \"severe\"}]",
        "{\"distortions\": [{\"category\": \"fog\", \"severity\": \"mild\"}]}",
        "{\"distortions\": [{\"category\": \"smoke\"}]}",
        "{\"distortions\": [{\"category\": \"low_light\", \"severity\": \"extreme\"}]}",
        "{\"distortions\": [{\"category\": 3, \"severity\": \"mild\"}]}",
        "{\"distortions\": [17]}"};
    static const std::vector<std::string> invariant = {
        "{\"distortions\": [{\"category\": \"smoke\", \"severity\": \"mild\"}]}",
        "{\"distortions\": [{\"category\": \"low_light\", \"severity\": \"mild\"}, "
        "{\"category\": \"over_exposure\", \"severity\": \"severe\"}]}",
        "{\"distortions\": [{\"category\": \"motion_blur\", \"severity\": \"mild\"}, "
        "{\"category\": \"motion_blur\", \"severity\": \"severe\"}]}",
        "{\"distortions\": [{\"category\": \"low_light\", \"severity\": \"normal\"}]}"};
    const auto& pool = rng() % 3 == 0 ? no_json : (rng() % 2 ? schema : invariant);
    return pool[rng() % pool.size()];
  }

 protected:
  agent::BackendResponse do_complete(const agent::BackendRequest& request) override {
    return {corrupt(request.image_id), std::nullopt, std::nullopt};
  }
};

// 11. 100 corrupted replies are scored as incorrect and the run completes.
Outcome robustness() {
  const auto root = workdir() / "robustness";
  const auto manifest = testing::make_benchmark(
      root, 100, 48, {{bench::Order::Single, 56}, {bench::Order::Second, 28}, {bench::Order::Third, 16}}, 1.0, 11);
  auto cfg = base_run(manifest, untrained_prior(), root / "run");
  cfg.modes = {harness::RunMode::AgentCot};
  CorruptingBackend backend;
  const auto summary = harness::run_pipeline(cfg, &backend);
  harness::emit_report(cfg.output_dir);

  int scored_wrong = 0, with_error = 0;
  std::map<std::string, int> codes;
  std::istringstream in(testing::slurp(cfg.output_dir / "records.jsonl"));
  for (std::string line; std::getline(in, line);) {
    const auto r = json::parse(line);
    const auto& m = r["modes"]["agent_cot"];
    scored_wrong += m["predicted"].is_null();
    with_error += m["error"].is_object();
    if (m["error"].is_object()) ++codes[m["error"]["code"].get<std::string>()];
  }
  const auto report = harness::accuracy_from_records(cfg.output_dir, harness::RunMode::AgentCot);
  double best = 0;
  for (const auto& row : report.rows) best = std::max(best, row.overall);
  std::string tally;
  for (const auto& [code, n] : codes) tally += fmt(" %s=%d", code.c_str(), n);
  return {summary.total_records == 100 && scored_wrong == 100 && with_error == 100 &&
              summary.failed_predictions == 100 && best == 0.0,
          fmt("%zu records, %d scored incorrect, %d with error, best accuracy %.3f; errors:", summary.total_records,
              scored_wrong, with_error, best) + tally};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 softmax suite", softmax_suite},
      {"2 routing oracle", routing_oracle},
      {"3 metric oracles", metric_oracles},
      {"4 prior gradient check", gradient_check},
      {"5 paired improvement", paired_improvement},
      {"6 degradation monotonicity", degradation_monotonicity},
      {"7 desk-scale prior accuracy", prior_accuracy},
      {"8 agent over prior", agent_over_prior},
      {"9 ablation trend", ablation_trend},
      {"10 determinism and cache", determinism},
      {"11 robustness", robustness},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures ? 1 : 0;
}
