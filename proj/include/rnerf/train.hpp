#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rnerf/autodiff.hpp"
#include "rnerf/network.hpp"
#include "rnerf/sample.hpp"

namespace rnerf {

inline double mse_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.empty() || predicted.size() != target.size()) {
    throw InvalidArgument("mse_loss: sequences must be non-empty and of equal length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predicted.size());
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Early stopping on validation MAE; 0 disables.
  std::size_t patience = 20;
  // Share of the training samples held out for model selection; 0 trains on all.
  double validation_fraction = 0.1;
  // Shift the initial radiation amplitudes so fresh ray models start at the mean target level.
  bool calibrate_output = true;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw InvalidArgument("validation_fraction must be in [0, 1)");
    }
  }
};

struct OptimizerState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;
};

inline OptimizerState make_optimizer_state(const ModelParams& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

namespace detail {

inline bool same_shapes(const ModelParams& a, const ModelParams& b) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> sa, sb;
  for_each_layer(a, [&](const std::string&, const DenseLayer& l) { sa.emplace_back(l.weights.rows(), l.weights.cols()); });
  for_each_layer(b, [&](const std::string&, const DenseLayer& l) { sb.emplace_back(l.weights.rows(), l.weights.cols()); });
  return sa == sb;
}

template <class Fn>
void zip_layers(ModelParams& p, const ModelParams& g, ModelParams& m, ModelParams& v, Fn&& fn) {
  std::vector<DenseLayer*> lp, lm, lv;
  std::vector<const DenseLayer*> lg;
  for_each_layer(p, [&](const std::string&, DenseLayer& l) { lp.push_back(&l); });
  for_each_layer(g, [&](const std::string&, const DenseLayer& l) { lg.push_back(&l); });
  for_each_layer(m, [&](const std::string&, DenseLayer& l) { lm.push_back(&l); });
  for_each_layer(v, [&](const std::string&, DenseLayer& l) { lv.push_back(&l); });
  for (std::size_t i = 0; i < lp.size(); ++i) {
    fn(lp[i]->weights, lg[i]->weights, lm[i]->weights, lv[i]->weights);
    fn(lp[i]->biases, lg[i]->biases, lm[i]->biases, lv[i]->biases);
  }
}

}  // namespace detail

/// Bias-corrected Adam, element-wise.
inline void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, const TrainConfig& cfg) {
  if (!detail::same_shapes(params, grads) || !detail::same_shapes(params, state.first_moment) ||
      !detail::same_shapes(params, state.second_moment)) {
    throw InvalidArgument("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = cfg.learning_rate;
  const double eps = cfg.adam_eps;
  detail::zip_layers(params, grads, state.first_moment, state.second_moment, [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  });
}

struct TrainHistory {
  std::vector<double> train_loss;  // standardized MSE per epoch
  std::vector<double> val_mae;     // dB per epoch (empty without validation)
  std::size_t best_epoch = 0;      // 1-based
  std::size_t floor_hits = 0;
};

struct EpochReport {
  std::size_t epoch;
  double train_loss;
  double val_mae;  // NaN without validation
};

struct TrainResult {
  Model model;
  OptimizerState optimizer;
  TrainHistory history;
};

inline TargetStats compute_target_stats(std::span<const SceneSample> samples) {
  TargetStats s;
  if (samples.empty()) return s;
  double mean = 0.0;
  for (const auto& x : samples) mean += x.strength_db;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& x : samples) var += (x.strength_db - mean) * (x.strength_db - mean);
  var /= static_cast<double>(samples.size());
  s.mean = mean;
  s.stddev = var > 1e-18 ? std::sqrt(var) : 1.0;
  return s;
}

inline double mean_abs_error(std::span<const double> pred, std::span<const SceneSample> truth) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i].strength_db);
  return pred.empty() ? 0.0 : acc / static_cast<double>(pred.size());
}

/// Adds a common offset to the raw radiation amplitude bias of every rendered
/// stage so that the mean prediction over `samples` matches `target_db`.
/// Direct models are left untouched. Returns the offset applied.
inline double calibrate_output_level(Model& model, std::span<const SceneSample> samples, double target_db) {
  if (model.spec.kind == ModelKind::direct_mlp || samples.empty()) return 0.0;
  const ModelParams base = model.params;
  auto mean_at = [&](double shift) {
    model.params = base;
    for (StageNetwork* net : {&model.params.stage1, &model.params.stage2}) {
      if (!net->empty()) net->s_head.biases(0) += shift;
    }
    const std::vector<double> p = predict_batch(model, samples);
    return std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  };
  double lo = -40.0, hi = 40.0;
  if (mean_at(lo) > target_db) hi = lo;
  else if (mean_at(hi) < target_db) lo = hi;
  for (int it = 0; it < 60 && hi - lo > 1e-6; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) < target_db ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);
  mean_at(shift);
  return shift;
}

struct TrainOptions {
  // Resume from a checkpoint's optimizer state (and keep the model's target stats).
  const OptimizerState* resume = nullptr;
  std::function<void(const EpochReport&)> on_epoch;
  BatchOptions batch;
};

/// Minibatch Adam on the standardized MSE. Shuffles every epoch from
/// `cfg.seed`, tracks validation MAE, and returns the best-validation model.
inline TrainResult train(std::span<const SceneSample> samples, const Model& initial, const TrainConfig& cfg,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  if (samples.size() < 2) throw InvalidArgument("train: need at least 2 samples");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(samples.size())));
  if (n_val >= samples.size()) n_val = samples.size() - 1;
  std::vector<SceneSample> val, fit;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_val ? val : fit).push_back(samples[order[k]]);

  TrainResult result{initial, opts.resume ? *opts.resume : make_optimizer_state(initial.params), {}};
  Model& model = result.model;
  if (opts.resume == nullptr) {
    model.targets = compute_target_stats(fit);
    if (cfg.calibrate_output) {
      const std::size_t n_cal = std::min<std::size_t>(fit.size(), 256);
      calibrate_output_level(model, std::span<const SceneSample>(fit).subspan(0, n_cal), model.targets.mean);
    }
  }

  Model best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> idx(fit.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<SceneSample> batch;
  ModelParams grads = zeros_like(model.params);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(idx.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(fit[idx[k]]);
      for_each_layer(grads, [](const std::string&, DenseLayer& l) {
        l.weights.setZero();
        l.biases.setZero();
      });
      const BatchResult r = evaluate_batch(model, batch, &grads, opts.batch);
      if (!std::isfinite(r.loss)) {
        throw NumericFailure("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                             std::to_string(start));
      }
      epoch_loss += r.loss * static_cast<double>(batch.size());
      result.history.floor_hits += r.floor_hits;
      adam_step(model.params, grads, result.optimizer, cfg);
    }
    epoch_loss /= static_cast<double>(fit.size());
    result.history.train_loss.push_back(epoch_loss);

    double val_mae = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      val_mae = mean_abs_error(predict_batch(model, val), val);
      result.history.val_mae.push_back(val_mae);
      if (val_mae < best_val) {
        best_val = val_mae;
        best = model;
        result.history.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      best = model;
      result.history.best_epoch = epoch;
    }
    if (opts.on_epoch) opts.on_epoch({epoch, epoch_loss, val_mae});
    if (cfg.patience > 0 && !val.empty() && since_best >= cfg.patience) break;
  }
  result.model = std::move(best);
  return result;
}

}  // namespace rnerf
