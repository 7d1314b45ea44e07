#include <doctest.h>

#include <random>
#include <vector>

#include "endoagent/kernels.hpp"

using namespace endoagent::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// FMA contraction changes the last bits, never more.
void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1.0));
  }
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar sum_sq_diff and multiply against plain loops") {
    const auto& s = scalar_table();
    const double a[] = {1, 2, 3};
    const double b[] = {0, 4, 3};
    CHECK(s.sum_sq_diff(a, b, 3) == 5.0);
    double out[3];
    s.multiply(a, b, out, 3);
    CHECK(out[1] == 8.0);
    s.safe_divide(a, b, out, 3, 0.5);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 0.5);
  }

  TEST_CASE("scalar filter_rows matches a direct oracle") {
    const auto& s = scalar_table();
    const double src[] = {1, 2, 3, 4, 5};
    const double taps[] = {1, 0, -1};
    double dst[3];
    s.filter_rows(src, 5, dst, 3, 1, taps, 3);
    CHECK(dst[0] == -2.0);
    CHECK(dst[2] == -2.0);
  }

  TEST_CASE("active table is one of the known tables") {
    const auto& t = active();
    if (t.isa == Isa::Avx2) {
      CHECK(avx2_table() != nullptr);
      CHECK(cpu_supports_avx2());
    } else {
      CHECK(&t == &scalar_table());
    }
  }

  TEST_CASE("avx2 kernels agree with the scalar reference") {
    const KernelTable* v = avx2_table();
    if (v == nullptr || !cpu_supports_avx2()) {
      MESSAGE("AVX2 variant unavailable; equivalence not exercised");
      return;
    }
    const auto& s = scalar_table();
    std::mt19937_64 rng(11);
    // Sizes straddle the 4-lane width and its remainders.
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 31u, 64u, 1001u}) {
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n, 0.0, 2.0);
      CHECK(v->sum_sq_diff(a.data(), b.data(), n) ==
            doctest::Approx(s.sum_sq_diff(a.data(), b.data(), n)).epsilon(1e-12));
      std::vector<double> x(n), y(n);
      s.multiply(a.data(), b.data(), x.data(), n);
      v->multiply(a.data(), b.data(), y.data(), n);
      CHECK(x == y);
      s.safe_divide(a.data(), b.data(), x.data(), n, 0.3);
      v->safe_divide(a.data(), b.data(), y.data(), n, 0.3);
      CHECK(x == y);
    }
    for (std::size_t ntaps : {1u, 3u, 7u, 11u}) {
      for (std::size_t out_w : {1u, 4u, 9u, 33u}) {
        const std::size_t rows = 5, stride = out_w + ntaps - 1 + 2;
        const auto src = random_vec(rng, rows * stride);
        const auto taps = random_vec(rng, ntaps);
        std::vector<double> x(rows * out_w), y(rows * out_w);
        s.filter_rows(src.data(), stride, x.data(), out_w, rows, taps.data(), ntaps);
        v->filter_rows(src.data(), stride, y.data(), out_w, rows, taps.data(), ntaps);
        check_close(x, y);

        const std::size_t out_h = out_w;
        const auto col_src = random_vec(rng, (out_h + ntaps - 1) * 13);
        std::vector<double> cx(out_h * 13), cy(out_h * 13);
        s.filter_cols(col_src.data(), 13, cx.data(), out_h, taps.data(), ntaps);
        v->filter_cols(col_src.data(), 13, cy.data(), out_h, taps.data(), ntaps);
        check_close(cx, cy);
      }
    }
    for (std::size_t kw : {1u, 3u, 5u}) {
      for (std::size_t kh : {1u, 3u, 7u}) {
        const std::size_t out_w = 10, out_h = 6;
        const auto src = random_vec(rng, (out_w + kw - 1) * (out_h + kh - 1));
        const auto k = random_vec(rng, kw * kh);
        std::vector<double> x(out_w * out_h), y(out_w * out_h);
        s.correlate2d(src.data(), x.data(), out_w, out_h, k.data(), kw, kh);
        v->correlate2d(src.data(), y.data(), out_w, out_h, k.data(), kw, kh);
        check_close(x, y);
      }
    }
  }
}
