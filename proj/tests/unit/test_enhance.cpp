#include <doctest.h>

#include <fstream>
#include <random>

#include "endoagent/agent.hpp"
#include "endoagent/encoding.hpp"
#include "endoagent/enhance.hpp"
#include "endoagent/metrics.hpp"
#include "support.hpp"

using namespace endoagent;
using namespace endoagent::enhance;
using endoagent::testing::code_of;
using endoagent::testing::max_abs_diff;
using endoagent::testing::random_image;

namespace {

double saturated_fraction(const ImageBuf& img) {
  std::size_t n = 0;
  for (double v : img.data()) n += v >= 1.0;
  return static_cast<double>(n) / static_cast<double>(img.data().size());
}

}  // namespace

TEST_SUITE("enhance") {
  TEST_CASE("low light fixed point and analytic inverse") {
    const auto black = ImageBuf::filled(8, 8, 0, 0, 0);
    CHECK(enhance_low_light(black, Severity::Mild, {}) == black);
    CHECK(enhance_low_light(black, Severity::Severe, {2.8, 0.4, true}) == black);

    bench::SynthesisParams p;
    p.low_light.mild.noise_sigma = 0.0;
    bench::Rng rng(1);
    const auto dark = bench::synth_low_light(ImageBuf::filled(8, 8, 0.5, 0.5, 0.5), Severity::Mild, p, rng);
    const auto back = enhance_low_light(dark, Severity::Mild, {1.8, 0.7, false});
    for (double v : back.data()) CHECK(std::abs(v - 0.5) <= 1.0 / 255.0);
    CHECK(code_of([&] { enhance_low_light(dark, Severity::Normal, {}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("low light never darkens on random dark images") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
      const auto img = random_image(rng, 12, 10, 0.0, 0.4);
      for (Severity s : {Severity::Mild, Severity::Severe}) {
        const LowLightPreset preset = s == Severity::Mild ? LowLightPreset{1.8, 0.7, false} : LowLightPreset{2.8, 0.4, false};
        CHECK(enhance_low_light(img, s, preset).mean() >= img.mean());
      }
    }
  }

  TEST_CASE("exposure closed form and zero fixed point") {
    ExposurePreset p;
    p.gain = 1.8;
    const auto out = correct_exposure(ImageBuf::filled(4, 4, 0.9, 0.9, 0.9), Severity::Mild, p);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.5));
    const auto zero = ImageBuf::filled(4, 4, 0, 0, 0);
    CHECK(correct_exposure(zero, Severity::Severe, {}) == zero);
  }

  TEST_CASE("exposure never increases saturation on random bright images") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      auto img = random_image(rng, 12, 10, 0.5, 1.0);
      std::vector<double> v(img.data().begin(), img.data().end());
      for (std::size_t k = 0; k < v.size(); k += 7) v[k] = 1.0;
      img = ImageBuf(12, 10, v);
      for (Severity s : {Severity::Mild, Severity::Severe}) {
        const ExposurePreset preset = s == Severity::Mild ? ExposurePreset{1.5} : ExposurePreset{2.2};
        CHECK(saturated_fraction(correct_exposure(img, s, preset)) <= saturated_fraction(img));
      }
    }
  }

  TEST_CASE("deblur fixtures") {
    const auto flat = ImageBuf::filled(24, 24, 0.3, 0.5, 0.7);
    CHECK(max_abs_diff(deblur(flat, Severity::Severe, {17, 30.0, 10}), flat) < 1e-9);
    std::mt19937_64 rng(4);
    const auto img = random_image(rng, 16, 16);
    CHECK(deblur(img, Severity::Mild, {7, 0.0, 0}) == img);
    CHECK(code_of([&] { deblur(img, Severity::Severe, {17, 0.0, 5}); }) == ErrorCode::KernelExceedsImage);
  }

  TEST_CASE("deblur with the true angle improves PSNR") {
    const bench::SynthesisParams p;
    double gain = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto sharp = bench::make_scene(64, 64, 900 + i);
      bench::SynthesisParams q = p;
      q.motion_blur.mild.angle = 9.0 * i;
      const auto blurred = bench::synth_motion_blur(sharp, Severity::Mild, q);
      const auto restored = deblur(blurred, Severity::Mild, {7, 0.0, 40}, 9.0 * i);
      gain += metrics::psnr(sharp, restored) - metrics::psnr(sharp, blurred);
    }
    CHECK(gain / 20.0 > 0.0);
  }

  TEST_CASE("desmoke on smoke-free frames with a near-zero dark channel") {
    for (int i = 0; i < 20; ++i) {
      // Endoscopy frames carry little blue; suppressing it gives the
      // near-zero dark channel of a clear frame.
      const auto clean = testing::scale_channels(bench::make_scene(96, 96, 200 + i), 1.0, 1.0, 0.02);
      CHECK(max_abs_diff(desmoke(clean, Severity::Severe, {}), clean) <= 0.02);
    }
  }

  TEST_CASE("airlight estimate on seeded haze") {
    bench::SynthesisParams p;
    p.smoke.airlight = 0.8;
    p.smoke.beta = 3.0;
    for (int i = 0; i < 20; ++i) {
      bench::Rng rng(i);
      const auto hazy = bench::synth_smoke(bench::make_scene(128, 128, 100 + i), Severity::Severe, p, rng);
      CHECK(std::abs(estimate_airlight(hazy, 7, 0.001) - 0.8) <= 0.1);
    }
  }

  TEST_CASE("desmoke limits and severity") {
    std::mt19937_64 rng(5);
    const auto img = random_image(rng, 20, 20);
    DesmokePreset off;
    off.omega = 0.0;
    CHECK(desmoke(img, Severity::Severe, off) == img);
    CHECK(code_of([&] { desmoke(img, Severity::Mild, {}); }) == ErrorCode::SeverityUnsupported);
  }

  TEST_CASE("desmoke reduces the haze veil") {
    const bench::SynthesisParams p;
    double before = 0, after = 0;
    for (int i = 0; i < 10; ++i) {
      const auto clean = bench::make_scene(96, 96, 300 + i);
      bench::Rng rng(i);
      const auto hazy = bench::synth_smoke(clean, Severity::Severe, p, rng);
      before += metrics::psnr(clean, hazy);
      after += metrics::psnr(clean, desmoke(hazy, Severity::Severe, {}));
    }
    CHECK(after > before);
  }

  TEST_CASE("dark channel and guided filter basics") {
    const auto img = ImageBuf::filled(9, 9, 0.7, 0.2, 0.5);
    for (double v : dark_channel(img, 2).data) CHECK(v == doctest::Approx(0.2));
    Plane guide(9, 9, 0.4), src(9, 9, 0.25);
    for (double v : guided_filter(guide, src, 2, 1e-3).data) CHECK(v == doctest::Approx(0.25));
  }

  TEST_CASE("default registry is valid and matches the shipped file") {
    const auto reg = EnhancerRegistry::defaults();
    CHECK_NOTHROW(reg.validate());
    CHECK(reg.entries().size() == 7);
    CHECK(reg.find(Category::Smoke, Severity::Mild) == nullptr);
    const auto shipped = EnhancerRegistry::load(std::filesystem::path(ENDOAGENT_DATA_DIR) / "registry.json");
    CHECK(shipped.to_json() == reg.to_json());
    CHECK(EnhancerRegistry::from_json(reg.to_json()).to_json() == reg.to_json());
  }

  TEST_CASE("registry validation") {
    auto reg = EnhancerRegistry::defaults();
    reg.set(Category::LowLight, Severity::Mild, {"deblur@severe", Operator::LowLight, {}});
    CHECK(code_of([&] { reg.validate(); }) == ErrorCode::InvariantViolation);
    EnhancerRegistry partial;
    partial.set(Category::LowLight, Severity::Mild, {"a", Operator::LowLight, {}});
    CHECK(code_of([&] { partial.validate(); }) == ErrorCode::InvariantViolation);
  }

  TEST_CASE("plan execution") {
    const auto reg = EnhancerRegistry::defaults();
    const auto img = bench::make_scene(48, 48, 77);
    const auto empty = apply_plan(img, {}, reg);
    CHECK(empty.image == img);
    CHECK(empty.provenance.empty());

    const auto single = agent::select_models(DistortionLabel::decode("over_exposure:severe"), reg);
    const auto r = apply_plan(img, single, reg);
    CHECK(r.image == run_enhancer(img, *reg.find(Category::OverExposure, Severity::Severe), Severity::Severe));

    const auto label = DistortionLabel::decode("smoke:severe+motion_blur:severe+over_exposure:mild");
    const auto plan = agent::select_models(label, reg);
    const auto three = apply_plan(img, plan, reg);
    REQUIRE(three.provenance.size() == 3);
    CHECK(three.provenance[0].enhancer_id == "desmoke@severe");
    CHECK(three.provenance[1].enhancer_id == "deblur@severe");
    CHECK(three.provenance[2].enhancer_id == "exposure@mild");
    CHECK(three.provenance[0].input_hash == image_hash(img));
    CHECK(three.provenance[0].output_hash == three.provenance[1].input_hash);
    CHECK(three.provenance[1].output_hash == three.provenance[2].input_hash);
    CHECK(three.provenance[2].output_hash == image_hash(three.image));

    // Replaying the steps by hand gives the same image.
    ImageBuf manual = img;
    for (const auto& step : plan.steps) manual = run_enhancer(manual, *reg.find(step.category, step.severity), step.severity);
    CHECK(manual == three.image);
  }

  TEST_CASE("metadata supplies the true blur angle") {
    const auto reg = EnhancerRegistry::defaults();
    const auto img = bench::make_scene(48, 48, 78);
    bench::AppliedSynthesis meta;
    meta.motion_blur = bench::MotionBlurParams{7, 63.0};
    nlohmann::json params;
    const auto with = run_enhancer(img, *reg.find(Category::MotionBlur, Severity::Mild), Severity::Mild, &meta, &params);
    CHECK(params["angle"] == 63.0);
    CHECK(with == deblur(img, Severity::Mild, {7, 0.0, 40}, 63.0));
  }

  TEST_CASE("mismatched plan step is rejected") {
    const auto reg = EnhancerRegistry::defaults();
    EnhancementPlan plan;
    plan.steps.push_back({"desmoke@severe", Category::LowLight, Severity::Mild});
    CHECK(code_of([&] { apply_plan(ImageBuf::filled(8, 8, 0, 0, 0), plan, reg); }) == ErrorCode::NoModelForLabel);
  }
}
