#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "endoagent/error.hpp"
#include "endoagent/filters.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::metrics {

using nlohmann::json;

namespace {

struct ShapeTable {
  std::vector<double> alpha;
  std::vector<double> ggd_ratio;   // G(1/a)G(3/a)/G(2/a)^2
  std::vector<double> aggd_ratio;  // G(2/a)^2/(G(1/a)G(3/a))
};

const ShapeTable& shape_table() {
  static const ShapeTable table = [] {
    ShapeTable t;
    for (int i = 0; i <= 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      const double g1 = std::tgamma(1.0 / a), g2 = std::tgamma(2.0 / a), g3 = std::tgamma(3.0 / a);
      t.alpha.push_back(a);
      t.ggd_ratio.push_back(g1 * g3 / (g2 * g2));
      t.aggd_ratio.push_back(g2 * g2 / (g1 * g3));
    }
    return t;
  }();
  return table;
}

double closest_alpha(const std::vector<double>& ratios, double target) {
  const auto& t = shape_table();
  std::size_t best = 0;
  double best_err = std::abs(ratios[0] - target);
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    const double err = std::abs(ratios[i] - target);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return t.alpha[best];
}

Plane to_luma255(const ImageBuf& img) {
  Plane l = img.luminance();
  for (double& v : l.data) v *= 255.0;
  return l;
}

}  // namespace

Plane mscn(const Plane& luma255, Plane* local_sigma) {
  static const std::vector<double> taps = gaussian_taps(7, 7.0 / 6.0);
  const Plane mu = filter_separable_same(luma255, taps, taps);
  const Plane sq = filter_separable_same(multiply(luma255, luma255), taps, taps);
  Plane out(luma255.width, luma255.height);
  Plane sigma(luma255.width, luma255.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    sigma.data[i] = std::sqrt(std::abs(sq.data[i] - mu.data[i] * mu.data[i]));
    out.data[i] = (luma255.data[i] - mu.data[i]) / (sigma.data[i] + 1.0);
  }
  if (local_sigma) *local_sigma = std::move(sigma);
  return out;
}

GgdFit fit_ggd(std::span<const double> x) {
  double sq = 0.0, abs_sum = 0.0;
  for (double v : x) {
    sq += v * v;
    abs_sum += std::abs(v);
  }
  const double n = static_cast<double>(x.size());
  if (x.empty() || abs_sum == 0.0) return {shape_table().alpha.back(), 0.0};
  const double variance = sq / n;
  const double mean_abs = abs_sum / n;
  return {closest_alpha(shape_table().ggd_ratio, variance / (mean_abs * mean_abs)), variance};
}

AggdFit fit_aggd(std::span<const double> x) {
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double v : x) {
    if (v < 0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
    sq += v * v;
  }
  if (x.empty() || sq == 0.0) return {shape_table().alpha.back(), 0.0, 0.0, 0.0};
  const double n = static_cast<double>(x.size());
  const double left_std = left_n ? std::sqrt(left_sq / static_cast<double>(left_n)) : 0.0;
  const double right_std = right_n ? std::sqrt(right_sq / static_cast<double>(right_n)) : 0.0;
  const double r_hat = (abs_sum / n) * (abs_sum / n) / (sq / n);
  double r_norm = r_hat;
  if (left_std > 0.0 && right_std > 0.0) {
    const double g = left_std / right_std;
    r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  }
  const double alpha = closest_alpha(shape_table().aggd_ratio, r_norm);
  const double mean = (right_std - left_std) * std::tgamma(2.0 / alpha) / std::tgamma(1.0 / alpha) *
                      std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
  return {alpha, mean, left_std * left_std, right_std * right_std};
}

std::array<double, kNssPerScale> nss_block_features(const Plane& m, int x0, int y0, int w, int h) {
  std::array<double, kNssPerScale> f{};
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(w) * h);
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) values.push_back(m.at(x, y));
  }
  const GgdFit g = fit_ggd(values);
  f[0] = g.alpha;
  f[1] = g.variance;

  // Horizontal, vertical, main diagonal, anti-diagonal neighbour products.
  const int offsets[4][4] = {{0, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, 1, 1}, {1, 0, 0, 1}};
  for (int o = 0; o < 4; ++o) {
    const int ax = offsets[o][0], ay = offsets[o][1], bx = offsets[o][2], by = offsets[o][3];
    const int span_x = std::max(ax, bx), span_y = std::max(ay, by);
    std::vector<double> prod;
    prod.reserve(values.size());
    for (int y = y0; y + span_y < y0 + h; ++y) {
      for (int x = x0; x + span_x < x0 + w; ++x) prod.push_back(m.at(x + ax, y + ay) * m.at(x + bx, y + by));
    }
    const AggdFit a = fit_aggd(prod);
    f[2 + 4 * o] = a.alpha;
    f[3 + 4 * o] = a.mean;
    f[4 + 4 * o] = a.left_variance;
    f[5 + 4 * o] = a.right_variance;
  }
  return f;
}

Plane half_scale(const Plane& p) {
  Plane out(p.width / 2, p.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) + p.at(2 * x, 2 * y + 1) +
                             p.at(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

std::vector<NssVector> niqe_patch_features(const ImageBuf& img, const NiqeParams& params,
                                           bool select_sharp) {
  const int ps = params.patch_size;
  if (ps < 4 || ps % 2 != 0) throw Error(ErrorCode::InvalidArgument, "patch_size must be even and >= 4");
  const Plane luma = to_luma255(img);
  Plane sigma;
  const Plane m1 = mscn(luma, &sigma);
  const Plane m2 = mscn(half_scale(luma));
  const int nx = img.width() / ps, ny = img.height() / ps;

  std::vector<NssVector> feats;
  std::vector<double> sharpness;
  for (int py = 0; py < ny; ++py) {
    for (int px = 0; px < nx; ++px) {
      NssVector v{};
      const auto a = nss_block_features(m1, px * ps, py * ps, ps, ps);
      const auto b = nss_block_features(m2, px * ps / 2, py * ps / 2, ps / 2, ps / 2);
      std::copy(a.begin(), a.end(), v.begin());
      std::copy(b.begin(), b.end(), v.begin() + kNssPerScale);
      feats.push_back(v);
      double s = 0.0;
      for (int y = py * ps; y < (py + 1) * ps; ++y) {
        for (int x = px * ps; x < (px + 1) * ps; ++x) s += sigma.at(x, y);
      }
      sharpness.push_back(s / (ps * ps));
    }
  }
  if (!select_sharp || feats.empty()) return feats;
  const double top = *std::max_element(sharpness.begin(), sharpness.end());
  std::vector<NssVector> kept;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (sharpness[i] >= params.sharpness_threshold * top) kept.push_back(feats[i]);
  }
  return kept;
}

namespace {

void mean_and_cov(const std::vector<NssVector>& rows, std::vector<double>& mean, std::vector<double>& cov) {
  const std::size_t n = rows.size();
  mean.assign(kNssFeatures, 0.0);
  for (const auto& r : rows) {
    for (int i = 0; i < kNssFeatures; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  cov.assign(kNssFeatures * kNssFeatures, 0.0);
  if (n < 2) return;
  for (const auto& r : rows) {
    for (int i = 0; i < kNssFeatures; ++i) {
      for (int j = 0; j < kNssFeatures; ++j) {
        cov[i * kNssFeatures + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
      }
    }
  }
  for (double& c : cov) c /= static_cast<double>(n - 1);
}

}  // namespace

NiqeModel fit_niqe(std::span<const ImageBuf> pristine, const NiqeParams& params) {
  if (pristine.size() < 20) {
    throw Error(ErrorCode::InsufficientCorpus, "NIQE needs at least 20 pristine images");
  }
  std::vector<NssVector> all;
  for (const auto& img : pristine) {
    auto f = niqe_patch_features(img, params, true);
    all.insert(all.end(), f.begin(), f.end());
  }
  if (all.size() < 2) throw Error(ErrorCode::InsufficientCorpus, "pristine corpus yields < 2 patches");
  NiqeModel model;
  model.params = params;
  mean_and_cov(all, model.mean, model.covariance);
  for (int i = 0; i < kNssFeatures; ++i) model.covariance[i * kNssFeatures + i] += params.regularization;
  return model;
}

double niqe(const NiqeModel& model, const ImageBuf& img) {
  const auto feats = niqe_patch_features(img, model.params, false);
  if (feats.size() < 2) throw Error(ErrorCode::TooSmall, "NIQE needs at least two patches");
  std::vector<double> mean, cov;
  mean_and_cov(feats, mean, cov);
  Eigen::MatrixXd m(kNssFeatures, kNssFeatures);
  Eigen::VectorXd d(kNssFeatures);
  for (int i = 0; i < kNssFeatures; ++i) {
    d(i) = model.mean[i] - mean[i];
    for (int j = 0; j < kNssFeatures; ++j) {
      m(i, j) = 0.5 * (model.covariance[i * kNssFeatures + j] + cov[i * kNssFeatures + j]);
    }
  }
  const Eigen::MatrixXd inv = m.completeOrthogonalDecomposition().pseudoInverse();
  return std::sqrt(std::max(0.0, d.dot(inv * d)));
}

json NiqeModel::to_json() const {
  return {{"params",
           {{"patch_size", params.patch_size},
            {"sharpness_threshold", params.sharpness_threshold},
            {"regularization", params.regularization}}},
          {"mean", mean},
          {"covariance", covariance}};
}

NiqeModel NiqeModel::from_json(const json& j) {
  NiqeModel m;
  try {
    const auto& p = j.at("params");
    m.params.patch_size = p.at("patch_size").get<int>();
    m.params.sharpness_threshold = p.at("sharpness_threshold").get<double>();
    m.params.regularization = p.at("regularization").get<double>();
    m.mean = j.at("mean").get<std::vector<double>>();
    m.covariance = j.at("covariance").get<std::vector<double>>();
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("niqe model: ") + ex.what());
  }
  if (m.mean.size() != kNssFeatures || m.covariance.size() != kNssFeatures * kNssFeatures) {
    throw Error(ErrorCode::ParseError, "niqe model has wrong dimensions");
  }
  return m;
}

NssVector brisque_features(const ImageBuf& img) {
  if (img.width() < 32 || img.height() < 32) throw Error(ErrorCode::TooSmall, "BRISQUE needs >= 32x32");
  const Plane luma = to_luma255(img);
  const Plane m1 = mscn(luma);
  const Plane m2 = mscn(half_scale(luma));
  NssVector v{};
  const auto a = nss_block_features(m1, 0, 0, m1.width, m1.height);
  const auto b = nss_block_features(m2, 0, 0, m2.width, m2.height);
  std::copy(a.begin(), a.end(), v.begin());
  std::copy(b.begin(), b.end(), v.begin() + kNssPerScale);
  return v;
}

double brisque_target(const DistortionLabel& label) {
  double t = 0.0;
  for (const auto& e : label.entries()) t += e.severity == Severity::Severe ? 50.0 : 25.0;
  return t;
}

double BrisqueModel::score(const NssVector& f) const {
  double s = bias;
  for (int i = 0; i < kNssFeatures; ++i) s += weights[i] * (f[i] - means[i]) / stds[i];
  return s;
}

BrisqueModel fit_brisque(std::span<const NssVector> features, std::span<const double> targets,
                         double lambda) {
  if (features.size() != targets.size() || features.empty()) {
    throw Error(ErrorCode::EmptyInput, "BRISQUE fit needs matching, nonempty features and targets");
  }
  BrisqueModel m;
  m.lambda = lambda;
  const double n = static_cast<double>(features.size());
  for (int i = 0; i < kNssFeatures; ++i) {
    double mu = 0.0;
    for (const auto& f : features) mu += f[i];
    mu /= n;
    double var = 0.0;
    for (const auto& f : features) var += (f[i] - mu) * (f[i] - mu);
    const double sd = std::sqrt(var / n);
    m.means[i] = mu;
    m.stds[i] = sd > 1e-12 ? sd : 1.0;
  }
  double y_mean = 0.0;
  for (double t : targets) y_mean += t;
  y_mean /= n;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), kNssFeatures);
  Eigen::VectorXd y(static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < features.size(); ++r) {
    for (int i = 0; i < kNssFeatures; ++i) {
      x(static_cast<Eigen::Index>(r), i) = (features[r][i] - m.means[i]) / m.stds[i];
    }
    y(static_cast<Eigen::Index>(r)) = targets[r] - y_mean;
  }
  const Eigen::MatrixXd a =
      x.transpose() * x + lambda * Eigen::MatrixXd::Identity(kNssFeatures, kNssFeatures);
  const Eigen::VectorXd w = a.ldlt().solve(x.transpose() * y);
  for (int i = 0; i < kNssFeatures; ++i) m.weights[i] = w(i);
  m.bias = y_mean;
  return m;
}

double brisque(const BrisqueModel& model, const ImageBuf& img) {
  return model.score(brisque_features(img));
}

json BrisqueModel::to_json() const {
  return {{"means", means}, {"stds", stds}, {"weights", weights}, {"bias", bias}, {"lambda", lambda}};
}

BrisqueModel BrisqueModel::from_json(const json& j) {
  BrisqueModel m;
  try {
    m.means = j.at("means").get<NssVector>();
    m.stds = j.at("stds").get<NssVector>();
    m.weights = j.at("weights").get<NssVector>();
    m.bias = j.at("bias").get<double>();
    m.lambda = j.at("lambda").get<double>();
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("brisque model: ") + ex.what());
  }
  return m;
}

}  // namespace endoagent::metrics
