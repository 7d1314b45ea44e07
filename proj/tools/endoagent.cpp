#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "endoagent/bench.hpp"
#include "endoagent/enhance.hpp"
#include "endoagent/error.hpp"
#include "endoagent/harness.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/metrics.hpp"
#include "endoagent/prior.hpp"

using namespace endoagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::FileNotFound, p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, p.string() + " is not valid JSON");
  return j;
}

void print_summary(const harness::RunSummary& s) {
  std::printf("run %s: %zu records (%zu new), %zu backend calls, %zu failed predictions\n",
              s.run_dir.string().c_str(), s.total_records, s.new_records, s.backend_calls,
              s.failed_predictions);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Endoscopic image distortion classification and enhancement"};
  app.require_subcommand(1);

  auto* scenes = app.add_subcommand("scenes", "Render a procedural clean scene corpus");
  fs::path scenes_out;
  int scene_count = 100, scene_w = 128, scene_h = 128;
  std::uint64_t scene_seed = 7;
  scenes->add_option("--out", scenes_out, "Output directory")->required();
  scenes->add_option("--count", scene_count, "Number of scenes");
  scenes->add_option("--width", scene_w);
  scenes->add_option("--height", scene_h);
  scenes->add_option("--seed", scene_seed);

  auto* synth = app.add_subcommand("synth", "Build a distorted benchmark from a clean manifest");
  fs::path synth_config, synth_out;
  synth->add_option("--config", synth_config, "Benchmark config JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* train = app.add_subcommand("train-prior", "Train the prior model on a manifest's train split");
  fs::path train_manifest, train_out, train_curve;
  prior::TrainHyper hyper;
  train->add_option("--manifest", train_manifest)->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Model JSON")->required();
  train->add_option("--epochs", hyper.epochs);
  train->add_option("--lr", hyper.learning_rate);
  train->add_option("--l2", hyper.l2);
  train->add_option("--loss-curve", train_curve, "Write the loss curve as JSON");

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  fs::path run_config;
  run->add_option("--config", run_config, "Run config JSON")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Emit report tables for a run directory");
  fs::path report_run;
  report->add_option("--run", report_run)->required()->check(CLI::ExistingDirectory);

  auto* ablate = app.add_subcommand("ablate", "Few-shot context ablation");
  fs::path ablate_config, ablate_contexts;
  ablate->add_option("--config", ablate_config, "Base run config JSON")->required()->check(CLI::ExistingFile);
  ablate->add_option("--contexts", ablate_contexts, "JSON array of context configs")
      ->required()
      ->check(CLI::ExistingFile);

  auto* enh = app.add_subcommand("enhance", "Enhance one image for a given label");
  fs::path enh_in, enh_out, enh_registry;
  std::string enh_label;
  std::optional<double> enh_angle;
  enh->add_option("--input", enh_in)->required()->check(CLI::ExistingFile);
  enh->add_option("--out", enh_out)->required();
  enh->add_option("--label", enh_label, "e.g. motion_blur:severe+low_light:mild")->required();
  enh->add_option("--registry", enh_registry)->check(CLI::ExistingFile);
  enh->add_option("--angle", enh_angle, "Blur angle in degrees (defaults to the sidecar's)");

  auto* eval = app.add_subcommand("evaluate", "Full-reference scores of an image against a reference");
  fs::path eval_ref, eval_img;
  eval->add_option("--reference", eval_ref)->required()->check(CLI::ExistingFile);
  eval->add_option("--image", eval_img)->required()->check(CLI::ExistingFile);

  auto* reg = app.add_subcommand("registry", "Print the default enhancer registry as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scenes) {
      const auto m = bench::generate_scene_corpus(scenes_out, scene_count, scene_w, scene_h, scene_seed);
      std::printf("wrote %zu scenes to %s\n", m.entries.size(), scenes_out.string().c_str());
    } else if (*synth) {
      auto cfg = bench::BenchmarkConfig::from_json(read_json(synth_config));
      if (cfg.source_manifest.is_relative()) cfg.source_manifest = synth_config.parent_path() / cfg.source_manifest;
      const auto m = bench::build_benchmark(cfg, synth_out);
      std::printf("wrote %zu entries to %s\n", m.entries.size(), (synth_out / "manifest.json").string().c_str());
    } else if (*train) {
      std::vector<double> curve;
      const auto model = prior::train_prior(read_manifest(train_manifest), hyper, &curve);
      prior::save_model(model, train_out);
      if (!train_curve.empty()) std::ofstream(train_curve) << json(curve).dump() << "\n";
      std::printf("trained prior: final loss %.6f\n", curve.empty() ? 0.0 : curve.back());
    } else if (*run) {
      const auto cfg = harness::RunConfig::load(run_config);
      print_summary(harness::run_pipeline(cfg));
      for (const auto& p : harness::emit_report(cfg.output_dir)) std::printf("%s\n", p.string().c_str());
    } else if (*report) {
      for (const auto& p : harness::emit_report(report_run)) std::printf("%s\n", p.string().c_str());
    } else if (*ablate) {
      const auto base = harness::RunConfig::load(ablate_config);
      std::vector<context::ContextConfig> contexts;
      for (const auto& c : read_json(ablate_contexts)) {
        json ctx = c;
        if (!ctx.contains("seed")) ctx["seed"] = base.seed;
        contexts.push_back(context::ContextConfig::from_json(ctx));
      }
      const auto result = harness::ablation_sweep(base, contexts);
      for (const auto& p : result.report_files) std::printf("%s\n", p.string().c_str());
    } else if (*enh) {
      const auto registry = enh_registry.empty() ? enhance::EnhancerRegistry::defaults()
                                                 : enhance::EnhancerRegistry::load(enh_registry);
      const auto label = DistortionLabel::decode(enh_label);
      auto sidecar = bench::read_sidecar(enh_in);
      if (enh_angle) {
        if (!sidecar) sidecar.emplace();
        if (!sidecar->motion_blur) sidecar->motion_blur.emplace();
        sidecar->motion_blur->angle = *enh_angle;
      }
      const auto plan = agent::select_models(label, registry);
      const auto result = enhance::apply_plan(load_image(enh_in), plan, registry, sidecar ? &*sidecar : nullptr);
      save_image(result.image, enh_out);
      json prov = json::array();
      for (const auto& r : result.provenance) prov.push_back(enhance::to_json(r));
      std::cout << prov.dump(2) << "\n";
    } else if (*reg) {
      std::cout << enhance::EnhancerRegistry::defaults().to_json().dump(2) << "\n";
    } else if (*eval) {
      const auto ref = load_image(eval_ref);
      const auto img = load_image(eval_img);
      std::printf("psnr %.4f\nssim %.4f\n", metrics::psnr(ref, img), metrics::ssim(ref, img));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
