#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "endoagent/error.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/prior.hpp"

namespace endoagent::prior {

using nlohmann::json;

std::vector<double> softmax_t(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidTemperature, "temperature must be finite and > 0");
  }
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - top) / temperature);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::array<double, 2> LogisticHead::logits(const FeatureVector& z) const {
  std::array<double, 2> out = bias;
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < kFeatureCount; ++i) out[k] += weights[k][i] * z[i];
  }
  return out;
}

FeatureVector PriorModel::standardize(const FeatureVector& f) const {
  FeatureVector z = compress_features(f);
  for (int i = 0; i < kFeatureCount; ++i) z[i] = (z[i] - feature_means[i]) / feature_stds[i];
  return z;
}

double head_loss(const LogisticHead& head, std::span<const FeatureVector> z, std::span<const int> y,
                 double l2, LogisticHead* grad) {
  if (grad) *grad = LogisticHead{};
  double loss = 0.0;
  const double inv_n = z.empty() ? 0.0 : 1.0 / static_cast<double>(z.size());
  for (std::size_t s = 0; s < z.size(); ++s) {
    const auto l = head.logits(z[s]);
    const double top = std::max(l[0], l[1]);
    const double lse = top + std::log(std::exp(l[0] - top) + std::exp(l[1] - top));
    loss -= (l[y[s]] - lse) * inv_n;
    if (!grad) continue;
    for (int k = 0; k < 2; ++k) {
      const double d = (std::exp(l[k] - lse) - (y[s] == k ? 1.0 : 0.0)) * inv_n;
      grad->bias[k] += d;
      for (int i = 0; i < kFeatureCount; ++i) grad->weights[k][i] += d * z[s][i];
    }
  }
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < kFeatureCount; ++i) {
      loss += 0.5 * l2 * head.weights[k][i] * head.weights[k][i];
      if (grad) grad->weights[k][i] += l2 * head.weights[k][i];
    }
  }
  return loss;
}

namespace {

struct HeadData {
  std::vector<FeatureVector> z;
  std::vector<int> y;
  bool fit = true;
};

void step(LogisticHead& head, const LogisticHead& grad, double lr) {
  for (int k = 0; k < 2; ++k) {
    head.bias[k] -= lr * grad.bias[k];
    for (int i = 0; i < kFeatureCount; ++i) head.weights[k][i] -= lr * grad.weights[k][i];
  }
}

// Severity head for a category whose present samples all share one tier:
// the head carries only the Laplace-smoothed prior.
LogisticHead constant_head(std::span<const int> y) {
  double severe = 0.0;
  for (int v : y) severe += v;
  const double p = (severe + 1.0) / (static_cast<double>(y.size()) + 2.0);
  LogisticHead h;
  h.bias = {0.0, std::log(p / (1.0 - p))};
  return h;
}

}  // namespace

PriorModel train_prior(std::span<const FeatureVector> features,
                       std::span<const DistortionLabel> labels, const TrainHyper& hyper,
                       std::vector<double>* loss_curve) {
  if (features.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "features and labels differ in length");
  }
  if (features.empty()) throw Error(ErrorCode::DegenerateData, "no training samples");
  if (hyper.epochs < 0 || !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid training hyperparameters");
  }

  PriorModel model;
  const double n = static_cast<double>(features.size());
  std::vector<FeatureVector> compressed;
  for (const auto& f : features) compressed.push_back(compress_features(f));
  for (int i = 0; i < kFeatureCount; ++i) {
    double m = 0.0;
    for (const auto& f : compressed) m += f[i];
    m /= n;
    double v = 0.0;
    for (const auto& f : compressed) v += (f[i] - m) * (f[i] - m);
    const double sd = std::sqrt(v / n);
    model.feature_means[i] = m;
    model.feature_stds[i] = sd > 1e-12 ? sd : 1.0;
  }

  std::array<HeadData, kCategoryCount> presence, severity;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const FeatureVector z = model.standardize(features[s]);
    for (Category c : kCategories) {
      const Severity sev = labels[s].severity_of(c);
      presence[index_of(c)].z.push_back(z);
      presence[index_of(c)].y.push_back(sev == Severity::Normal ? 0 : 1);
      if (sev != Severity::Normal) {
        severity[index_of(c)].z.push_back(z);
        severity[index_of(c)].y.push_back(sev == Severity::Severe ? 1 : 0);
      }
    }
  }
  for (Category c : kCategories) {
    const auto& y = presence[index_of(c)].y;
    const auto present = std::count(y.begin(), y.end(), 1);
    if (present == 0 || present == static_cast<std::ptrdiff_t>(y.size())) {
      throw Error(ErrorCode::DegenerateData,
                  std::string("category ") + std::string(to_token(c)) + " lacks a presence class");
    }
    auto& sev = severity[index_of(c)];
    const auto severe = std::count(sev.y.begin(), sev.y.end(), 1);
    if (severe == 0 || severe == static_cast<std::ptrdiff_t>(sev.y.size())) {
      sev.fit = false;
      model.severity[index_of(c)] = constant_head(sev.y);
    }
  }

  auto total_loss = [&]() {
    double total = 0.0;
    for (int c = 0; c < kCategoryCount; ++c) {
      total += head_loss(model.presence[c], presence[c].z, presence[c].y, hyper.l2);
      if (severity[c].fit) total += head_loss(model.severity[c], severity[c].z, severity[c].y, hyper.l2);
    }
    if (!std::isfinite(total)) throw Error(ErrorCode::NonFiniteLoss, "training loss diverged");
    return total;
  };

  LogisticHead grad;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (loss_curve) loss_curve->push_back(total_loss());
    for (int c = 0; c < kCategoryCount; ++c) {
      head_loss(model.presence[c], presence[c].z, presence[c].y, hyper.l2, &grad);
      step(model.presence[c], grad, hyper.learning_rate);
      if (!severity[c].fit) continue;
      head_loss(model.severity[c], severity[c].z, severity[c].y, hyper.l2, &grad);
      step(model.severity[c], grad, hyper.learning_rate);
    }
  }
  const double final_loss = total_loss();
  if (loss_curve) loss_curve->push_back(final_loss);
  return model;
}

PriorModel train_prior(const DatasetManifest& manifest, const TrainHyper& hyper,
                       std::vector<double>* loss_curve) {
  std::vector<FeatureVector> features;
  std::vector<DistortionLabel> labels;
  for (const ManifestEntry* e : manifest.split(Split::Train)) {
    features.push_back(extract_features(load_image(manifest.resolve(e->distorted_path))));
    labels.push_back(e->label);
  }
  return train_prior(features, labels, hyper, loss_curve);
}

SoftLabels prior_distributions(const PriorModel& model, const FeatureVector& features) {
  const FeatureVector z = model.standardize(features);
  SoftLabels out;
  for (int c = 0; c < kCategoryCount; ++c) {
    const auto lp = model.presence[c].logits(z);
    const auto ls = model.severity[c].logits(z);
    const auto pp = softmax_t(lp, model.temperature);
    const auto ps = softmax_t(ls, model.temperature);
    out.categories[c].presence = {pp[0], pp[1]};
    out.categories[c].severity = {ps[0], ps[1]};
  }
  return out;
}

SoftLabels prior_distributions(const PriorModel& model, const ImageBuf& img) {
  return prior_distributions(model, extract_features(img));
}

DistortionLabel hard_label(const SoftLabels& soft, double presence_threshold) {
  std::vector<LabelEntry> entries;
  for (Category c : kCategories) {
    const auto& b = soft.at(c);
    if (!(b.p_present() > presence_threshold)) continue;
    Severity s = b.severity[1] > b.severity[0] ? Severity::Severe : Severity::Mild;
    if (c == Category::Smoke) s = Severity::Severe;
    entries.push_back({c, s});
  }
  const auto low = std::find_if(entries.begin(), entries.end(),
                                [](const LabelEntry& e) { return e.category == Category::LowLight; });
  const auto over = std::find_if(entries.begin(), entries.end(), [](const LabelEntry& e) {
    return e.category == Category::OverExposure;
  });
  if (low != entries.end() && over != entries.end()) {
    const bool keep_low =
        soft.at(Category::LowLight).p_present() >= soft.at(Category::OverExposure).p_present();
    entries.erase(keep_low ? over : low);
  }
  return DistortionLabel::make(std::move(entries));
}

namespace {

json head_json(const LogisticHead& h) {
  return {{"weights", {h.weights[0], h.weights[1]}}, {"bias", h.bias}};
}

LogisticHead head_from(const json& j) {
  LogisticHead h;
  h.weights[0] = j.at("weights").at(0).get<FeatureVector>();
  h.weights[1] = j.at("weights").at(1).get<FeatureVector>();
  h.bias = j.at("bias").get<std::array<double, 2>>();
  return h;
}

}  // namespace

json to_json(const PriorModel& model) {
  json names = json::array();
  for (int i = 0; i < kFeatureCount; ++i) names.push_back(feature_name(i));
  json heads = json::object();
  for (Category c : kCategories) {
    heads[std::string(to_token(c))] = {{"presence", head_json(model.presence[index_of(c)])},
                                       {"severity", head_json(model.severity[index_of(c)])}};
  }
  return {{"feature_schema_version", kFeatureSchemaVersion},
          {"feature_names", names},
          {"feature_means", model.feature_means},
          {"feature_stds", model.feature_stds},
          {"heads", heads},
          {"T", model.temperature}};
}

PriorModel model_from_json(const json& j) {
  PriorModel m;
  try {
    if (j.at("feature_schema_version").get<int>() != kFeatureSchemaVersion) {
      throw Error(ErrorCode::ParseError, "unsupported feature_schema_version");
    }
    m.feature_means = j.at("feature_means").get<FeatureVector>();
    m.feature_stds = j.at("feature_stds").get<FeatureVector>();
    m.temperature = j.at("T").get<double>();
    for (Category c : kCategories) {
      const auto& h = j.at("heads").at(std::string(to_token(c)));
      m.presence[index_of(c)] = head_from(h.at("presence"));
      m.severity[index_of(c)] = head_from(h.at("severity"));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("prior model: ") + ex.what());
  }
  if (!(m.temperature > 0.0)) throw Error(ErrorCode::InvalidTemperature, "model T must be > 0");
  for (double s : m.feature_stds) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::ParseError, "feature_stds must be > 0");
  }
  return m;
}

void save_model(const PriorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << to_json(model).dump(2) << "\n";
}

PriorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
}

json to_json(const SoftLabels& soft) {
  json j = json::object();
  for (Category c : kCategories) {
    const auto& b = soft.at(c);
    j[std::string(to_token(c))] = {{"presence", b.presence}, {"severity", b.severity}};
  }
  return j;
}

}  // namespace endoagent::prior
