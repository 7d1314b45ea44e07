#include <doctest.h>

#include <set>

#include "endoagent/error.hpp"
#include "endoagent/label.hpp"
#include "support.hpp"

using namespace endoagent;

using endoagent::testing::code_of;

TEST_SUITE("label") {
  TEST_CASE("empty label encodes as normal") {
    CHECK(DistortionLabel{}.encode() == "normal");
    CHECK(DistortionLabel::decode("normal").empty());
  }

  TEST_CASE("third-order label round trip in canonical order") {
    const auto label = DistortionLabel::make({{Category::MotionBlur, Severity::Severe},
                                              {Category::OverExposure, Severity::Mild},
                                              {Category::Smoke, Severity::Severe}});
    CHECK(label.encode() == "smoke:severe+motion_blur:severe+over_exposure:mild");
    CHECK(DistortionLabel::decode(label.encode()) == label);
    CHECK(label.entries().front().category == Category::Smoke);
  }

  TEST_CASE("decode is order-insensitive and canonicalizes") {
    const auto a = DistortionLabel::decode("low_light:mild+motion_blur:severe");
    CHECK(a.encode() == "motion_blur:severe+low_light:mild");
  }

  TEST_CASE("invariant violations") {
    CHECK(code_of([] { DistortionLabel::decode("smoke:mild"); }) == ErrorCode::InvariantViolation);
    CHECK(code_of([] { DistortionLabel::decode("low_light:mild+over_exposure:mild"); }) ==
          ErrorCode::InvariantViolation);
    CHECK(code_of([] { DistortionLabel::decode("low_light:mild+low_light:severe"); }) ==
          ErrorCode::InvariantViolation);
    CHECK(code_of([] { DistortionLabel::make({{Category::LowLight, Severity::Normal}}); }) ==
          ErrorCode::InvariantViolation);
    CHECK(DistortionLabel::check({{Category::Smoke, Severity::Severe}}) == std::nullopt);
  }

  TEST_CASE("unknown tokens are parse errors") {
    CHECK(code_of([] { DistortionLabel::decode("fog:severe"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { DistortionLabel::decode("low_light:extreme"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { DistortionLabel::decode("low_light"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { DistortionLabel::decode(""); }) == ErrorCode::ParseError);
  }

  TEST_CASE("enumeration covers exactly the valid labels") {
    const auto all = enumerate_valid_labels();
    CHECK(all.size() == 30);
    std::set<std::string> seen;
    for (const auto& l : all) {
      CHECK(DistortionLabel::check(l.entries()) == std::nullopt);
      CHECK(DistortionLabel::decode(l.encode()) == l);
      seen.insert(l.encode());
    }
    CHECK(seen.size() == all.size());
    CHECK(all.front().empty());
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].size() <= all[i].size());
  }

  TEST_CASE("contains and severity_of") {
    const auto l = DistortionLabel::decode("motion_blur:mild");
    CHECK(l.contains(Category::MotionBlur));
    CHECK_FALSE(l.contains(Category::Smoke));
    CHECK(l.severity_of(Category::MotionBlur) == Severity::Mild);
    CHECK(l.severity_of(Category::LowLight) == Severity::Normal);
  }
}
