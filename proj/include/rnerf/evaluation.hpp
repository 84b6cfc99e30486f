#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rnerf/autodiff.hpp"
#include "rnerf/network.hpp"
#include "rnerf/sample.hpp"
#include "rnerf/train.hpp"

namespace rnerf {

struct MetricReport {
  double mae = 0.0;
  double med = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

namespace detail {

inline std::vector<double> abs_errors(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw InvalidArgument("metrics: prediction and truth must be non-empty and of equal length");
  }
  std::vector<double> e(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) e[i] = std::abs(truth[i] - pred[i]);
  return e;
}

}  // namespace detail

/// MAE, median absolute error (mean of the two central values for even
/// counts) and RMSE, all in dB.
inline MetricReport metrics(std::span<const double> pred, std::span<const double> truth) {
  std::vector<double> e = detail::abs_errors(pred, truth);
  MetricReport r;
  r.count = e.size();
  double sum = 0.0;
  double sq = 0.0;
  for (double x : e) {
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(e.size());
  r.mae = sum / n;
  r.rmse = std::sqrt(sq / n);
  std::sort(e.begin(), e.end());
  const std::size_t mid = e.size() / 2;
  r.med = e.size() % 2 == 1 ? e[mid] : 0.5 * (e[mid - 1] + e[mid]);
  return r;
}

inline std::vector<double> truths(std::span<const SceneSample> samples) {
  std::vector<double> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.strength_db);
  return t;
}

/// Fraction of samples with |error| <= threshold, per (ascending) threshold.
inline std::vector<double> error_cdf(std::span<const double> pred, std::span<const double> truth,
                                     std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InvalidArgument("error_cdf: thresholds must be sorted ascending");
  }
  std::vector<double> e = detail::abs_errors(pred, truth);
  std::sort(e.begin(), e.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below = std::upper_bound(e.begin(), e.end(), t) - e.begin();
    out.push_back(static_cast<double>(below) / static_cast<double>(e.size()));
  }
  return out;
}

/// 0 to 20 dB in 0.25 dB steps.
inline std::vector<double> default_cdf_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 80; ++i) t.push_back(0.25 * i);
  return t;
}

// ---------------------------------------------------------------------------
// MRI-style interpolation baseline: log-distance trend over the total path
// length, inverse-distance-weighted residuals in RX space.

class MriBaseline {
 public:
  explicit MriBaseline(std::span<const SceneSample> train, double power = 2.0) : samples_(train.begin(), train.end()), power_(power) {
    if (samples_.empty()) throw InvalidArgument("mri_baseline: empty training set");
    fit_trend();
    residuals_.reserve(samples_.size());
    for (const auto& s : samples_) residuals_.push_back(s.strength_db - trend(s.tx, s.ris, s.rx));
  }

  double intercept() const { return intercept_; }
  double slope() const { return slope_; }

  double trend(const Point3& tx, const Point3& ris, const Point3& rx) const {
    return intercept_ + slope_ * log_path(tx, ris, rx);
  }

  double predict(const Point3& tx, const Point3& ris, const Point3& rx) const {
    bool any_same_ris = false;
    for (const auto& s : samples_) {
      if (s.ris == ris) {
        any_same_ris = true;
        break;
      }
    }
    double wsum = 0.0;
    double acc = 0.0;
    double exact_sum = 0.0;
    std::size_t exact_n = 0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (any_same_ris && !(s.ris == ris)) continue;
      const double d = distance(s.rx, rx);
      if (d < 1e-12) {
        exact_sum += residuals_[i];
        ++exact_n;
        continue;
      }
      const double w = 1.0 / std::pow(d, power_);
      wsum += w;
      acc += w * residuals_[i];
    }
    const double residual = exact_n > 0 ? exact_sum / static_cast<double>(exact_n) : acc / wsum;
    return trend(tx, ris, rx) + residual;
  }

  std::vector<double> predict(std::span<const SceneSample> query) const {
    std::vector<double> out;
    out.reserve(query.size());
    for (const auto& q : query) out.push_back(predict(q.tx, q.ris, q.rx));
    return out;
  }

 private:
  static double log_path(const Point3& tx, const Point3& ris, const Point3& rx) {
    return 10.0 * std::log10(std::max(distance(tx, ris) + distance(ris, rx), 1e-9));
  }

  void fit_trend() {
    // Least squares y = a + b x, x = 10 log10(d_total). Degenerate x -> b = 0.
    const double n = static_cast<double>(samples_.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& s : samples_) {
      sx += log_path(s.tx, s.ris, s.rx);
      sy += s.strength_db;
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& s : samples_) {
      const double dx = log_path(s.tx, s.ris, s.rx) - mx;
      sxx += dx * dx;
      sxy += dx * (s.strength_db - my);
    }
    slope_ = sxx > 1e-12 ? sxy / sxx : 0.0;
    intercept_ = my - slope_ * mx;
  }

  std::vector<SceneSample> samples_;
  std::vector<double> residuals_;
  double power_;
  double intercept_ = 0.0;
  double slope_ = 0.0;
};

inline double mri_baseline(std::span<const SceneSample> train, const Point3& tx, const Point3& ris, const Point3& rx) {
  return MriBaseline(train).predict(tx, ris, rx);
}

// ---------------------------------------------------------------------------
// Learned models under one experimental setup.

/// Shared setup for every learned model in a comparison.
struct ExperimentSetup {
  ModelSpec spec;  // kind/use_pe are overridden per run
  RayTracingConfig rays;
  SceneBounds bounds;
  TrainConfig train;
  double floor_eps = kDefaultFloorEps;
};

inline Model make_model(const ExperimentSetup& setup, ModelKind kind, bool use_pe, std::uint64_t seed) {
  Model m;
  m.spec = setup.spec;
  m.spec.kind = kind;
  m.spec.use_pe = use_pe;
  m.rays = setup.rays;
  m.bounds = setup.bounds;
  m.floor_eps = setup.floor_eps;
  m.params = init_params(m.spec, seed);
  return m;
}

struct FittedModel {
  TrainResult trained;
  std::vector<double> test_predictions;
  MetricReport test_metrics;
};

/// Trains one model kind with `seed` (initialization and shuffling) and
/// scores it on `test`.
inline FittedModel fit_and_score(std::span<const SceneSample> train_set, std::span<const SceneSample> test_set,
                                 const ExperimentSetup& setup, ModelKind kind, bool use_pe, std::uint64_t seed,
                                 const TrainOptions& opts = {}) {
  TrainConfig cfg = setup.train;
  cfg.seed = seed;
  FittedModel out{train(train_set, make_model(setup, kind, use_pe, seed), cfg, opts), {}, {}};
  out.test_predictions = predict_batch(out.trained.model, test_set);
  out.test_metrics = metrics(out.test_predictions, truths(test_set));
  return out;
}

/// Direct regressor from encoded (TX, RIS, RX) to dB. No rays, no rendering.
inline TrainResult mlp_baseline_train(std::span<const SceneSample> train_set, const ExperimentSetup& setup,
                                      std::uint64_t seed, bool use_pe = true, const TrainOptions& opts = {}) {
  TrainConfig cfg = setup.train;
  cfg.seed = seed;
  return train(train_set, make_model(setup, ModelKind::direct_mlp, use_pe, seed), cfg, opts);
}

inline std::vector<double> mlp_baseline_predict(const Model& model, std::span<const SceneSample> query) {
  if (model.spec.kind != ModelKind::direct_mlp) throw InvalidArgument("mlp_baseline_predict: not a direct model");
  return predict_batch(model, query);
}

/// One stage rendered from the RX only, with the RIS position as extra
/// conditioning.
inline TrainResult single_stage_train(std::span<const SceneSample> train_set, const ExperimentSetup& setup,
                                      std::uint64_t seed, const TrainOptions& opts = {}) {
  TrainConfig cfg = setup.train;
  cfg.seed = seed;
  return train(train_set, make_model(setup, ModelKind::single_stage, setup.spec.use_pe, seed), cfg, opts);
}

struct AblationConfig {
  bool use_ray_tracing = true;
  bool use_pe = true;
};

inline std::string ablation_label(const AblationConfig& a) {
  return std::string(a.use_ray_tracing ? "ray-tracing" : "no-ray-tracing") + (a.use_pe ? "+pe" : "-pe");
}

/// The 2 x 2 grid in table order: (RT, PE), (RT, no PE), (no RT, PE), (no RT, no PE).
inline std::vector<AblationConfig> default_ablation_grid() {
  return {{true, true}, {true, false}, {false, true}, {false, false}};
}

struct AblationRow {
  AblationConfig config;
  MetricReport metrics;
  std::uint64_t seed = 0;
};

/// "No ray tracing" runs the direct MLP; "no PE" feeds raw normalized coordinates.
inline std::vector<AblationRow> run_ablation(std::span<const SceneSample> train_set, std::span<const SceneSample> test_set,
                                             const ExperimentSetup& setup, std::span<const AblationConfig> grid,
                                             std::uint64_t seed, const TrainOptions& opts = {}) {
  std::vector<AblationRow> rows;
  for (const auto& a : grid) {
    const ModelKind kind = a.use_ray_tracing ? ModelKind::two_stage : ModelKind::direct_mlp;
    rows.push_back({a, fit_and_score(train_set, test_set, setup, kind, a.use_pe, seed, opts).test_metrics, seed});
  }
  return rows;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace rnerf
