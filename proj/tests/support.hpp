#pragma once

// Shared fixtures for the unit and acceptance binaries.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "endoagent/agent.hpp"
#include "endoagent/bench.hpp"
#include "endoagent/error.hpp"
#include "endoagent/image.hpp"
#include "endoagent/manifest.hpp"

namespace endoagent::testing {

namespace fs = std::filesystem;

/// Runs fn and returns the code of the endoagent::Error it throws.
template <class F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an endoagent::Error");
  return ErrorCode::ConfigError;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("endoagent_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline ImageBuf random_image(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(w) * h * 3);
  for (double& x : v) x = u(rng);
  return ImageBuf(w, h, std::move(v));
}

/// Channel-wise scale, e.g. {1, 1, 0.02} to suppress blue.
inline ImageBuf scale_channels(const ImageBuf& img, double r, double g, double b) {
  std::vector<double> v(img.data().begin(), img.data().end());
  const double s[3] = {r, g, b};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= s[i % 3];
  return ImageBuf::from_unclamped(img.width(), img.height(), std::move(v));
}

inline double max_abs_diff(const ImageBuf& a, const ImageBuf& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Scene corpus plus a synthesized benchmark inside `root`. Returns the
/// benchmark manifest path.
inline fs::path make_benchmark(const fs::path& root, int scenes, int size,
                               const std::map<bench::Order, int>& counts, double test_fraction,
                               std::uint64_t seed,
                               const std::map<std::string, int>& label_counts = {}) {
  bench::generate_scene_corpus(root / "scenes", scenes, size, size, seed);
  bench::BenchmarkConfig cfg;
  cfg.source_manifest = root / "scenes" / "manifest.json";
  cfg.seed = seed;
  cfg.counts = counts;
  cfg.label_counts = label_counts;
  cfg.test_fraction = test_fraction;
  bench::build_benchmark(cfg, root / "bench");
  return root / "bench" / "manifest.json";
}

/// Pixel-by-pixel PSNR, peak 1, capped like the library.
inline double psnr_oracle(const ImageBuf& a, const ImageBuf& b) {
  long double se = 0.0L;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const long double d = static_cast<long double>(a.data()[i]) - b.data()[i];
    se += d * d;
  }
  const double mse = static_cast<double>(se / a.data().size());
  return mse == 0.0 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

/// Window-by-window SSIM on BT.601 luma with an 11x11 Gaussian (sigma 1.5)
/// over every fully contained window, evaluated directly from the
/// weighted sums at each position.
inline double ssim_oracle(const ImageBuf& a, const ImageBuf& b, int window = 11, double sigma = 1.5) {
  auto luma = [](const ImageBuf& img, int x, int y) {
    return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  };
  std::vector<double> g(window);
  double gs = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - (window - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    gs += g[i];
  }
  for (double& v : g) v /= gs;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + window <= a.height(); ++y0) {
    for (int x0 = 0; x0 + window <= a.width(); ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int j = 0; j < window; ++j) {
        for (int i = 0; i < window; ++i) {
          const double w = g[i] * g[j];
          const double x = luma(a, x0 + i, y0 + j), y = luma(b, x0 + i, y0 + j);
          mx += w * x;
          my += w * y;
          sxx += w * x * x;
          syy += w * y * y;
          sxy += w * x * y;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

/// Backend that replays canned responses, cycling through the script.
class ScriptedBackend : public agent::Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> script, std::string id = "scripted")
      : script_(std::move(script)), id_(std::move(id)) {}
  std::string model_id() const override { return id_; }
  std::vector<std::string> prompts_seen() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }

 protected:
  agent::BackendResponse do_complete(const agent::BackendRequest& request) override {
    std::lock_guard lock(mutex_);
    prompts_.push_back(request.prompt ? request.prompt->text_only() : std::string());
    return {script_[next_++ % script_.size()], std::nullopt, std::nullopt};
  }

 private:
  std::vector<std::string> script_;
  std::string id_;
  mutable std::mutex mutex_;
  std::vector<std::string> prompts_;
  std::size_t next_ = 0;
};

}  // namespace endoagent::testing
