#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rnerf/network.hpp"
#include "rnerf/sample.hpp"

namespace rnerf {

/// Activations of one stage over a block of voxel columns, kept for the
/// backward pass. One tape per block; discarded once the block is done.
struct StageTape {
  std::vector<Eigen::MatrixXd> tn_acts;  // [0] = TN input, [k+1] = output of TN layer k
  Eigen::MatrixXd t_raw;                 // 2 x V
  Eigen::MatrixXd rn_input;              // [conditioning; feature]
  std::vector<Eigen::MatrixXd> rn_acts;  // [k] = output of RN layer k
  Eigen::MatrixXd s_raw;                 // 2 x V

  Eigen::Index columns() const { return t_raw.cols(); }
};

namespace detail {

inline Eigen::MatrixXd affine(const DenseLayer& l, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = l.weights * x;
  y.colwise() += l.biases;
  return y;
}

inline void relu_inplace(Eigen::MatrixXd& m) { m = m.cwiseMax(0.0); }

/// Accumulates dW, db for y = W x + b and returns dL/dx.
inline Eigen::MatrixXd affine_backward(const DenseLayer& l, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy,
                                       DenseLayer& grad, bool need_input_grad = true) {
  grad.weights.noalias() += dy * x.transpose();
  grad.biases += dy.rowwise().sum();
  if (!need_input_grad) return {};
  return l.weights.transpose() * dy;
}

inline void relu_backward_inplace(Eigen::MatrixXd& dy, const Eigen::MatrixXd& out) {
  dy = (out.array() > 0.0).select(dy, 0.0);
}

}  // namespace detail

inline StageTape stage_forward(const StageNetwork& net, const Eigen::MatrixXd& position,
                               const Eigen::MatrixXd& conditioning) {
  StageTape tape;
  tape.tn_acts.reserve(net.tn.size() + 1);
  tape.tn_acts.push_back(position);
  for (const auto& layer : net.tn) {
    Eigen::MatrixXd h = detail::affine(layer, tape.tn_acts.back());
    detail::relu_inplace(h);
    tape.tn_acts.push_back(std::move(h));
  }
  const Eigen::MatrixXd& top = tape.tn_acts.back();
  tape.t_raw = detail::affine(net.t_head, top);
  tape.rn_input.resize(conditioning.rows() + net.feature_head.out_dim(), position.cols());
  tape.rn_input.topRows(conditioning.rows()) = conditioning;
  tape.rn_input.bottomRows(net.feature_head.out_dim()) = detail::affine(net.feature_head, top);
  const Eigen::MatrixXd* in = &tape.rn_input;
  tape.rn_acts.reserve(net.rn.size());
  for (const auto& layer : net.rn) {
    Eigen::MatrixXd h = detail::affine(layer, *in);
    detail::relu_inplace(h);
    tape.rn_acts.push_back(std::move(h));
    in = &tape.rn_acts.back();
  }
  tape.s_raw = detail::affine(net.s_head, *in);
  return tape;
}

/// Backpropagates dL/d(s_raw), dL/d(t_raw) into `grad` (accumulating).
inline void stage_backward(const StageNetwork& net, const StageTape& tape, const Eigen::MatrixXd& d_s_raw,
                           const Eigen::MatrixXd& d_t_raw, StageNetwork& grad) {
  Eigen::MatrixXd d = detail::affine_backward(net.s_head, tape.rn_acts.back(), d_s_raw, grad.s_head);
  for (std::size_t k = net.rn.size(); k-- > 0;) {
    detail::relu_backward_inplace(d, tape.rn_acts[k]);
    const Eigen::MatrixXd& input = k == 0 ? tape.rn_input : tape.rn_acts[k - 1];
    d = detail::affine_backward(net.rn[k], input, d, grad.rn[k]);
  }
  const Eigen::MatrixXd d_feature = d.bottomRows(net.feature_head.out_dim());
  const Eigen::MatrixXd& top = tape.tn_acts.back();
  Eigen::MatrixXd d_top = detail::affine_backward(net.feature_head, top, d_feature, grad.feature_head);
  d_top += detail::affine_backward(net.t_head, top, d_t_raw, grad.t_head);
  for (std::size_t k = net.tn.size(); k-- > 0;) {
    detail::relu_backward_inplace(d_top, tape.tn_acts[k + 1]);
    d_top = detail::affine_backward(net.tn[k], tape.tn_acts[k], d_top, grad.tn[k], k > 0);
  }
}

/// Complex sum of S * T over columns [first, first + count) of a tape.
inline std::complex<double> render_columns(const StageTape& tape, Eigen::Index first, Eigen::Index count) {
  double re = 0.0;
  double im = 0.0;
  for (Eigen::Index k = first; k < first + count; ++k) {
    const double mag = softplus(tape.s_raw(0, k)) * softplus(tape.t_raw(0, k));
    const double ph = tape.s_raw(1, k) + tape.t_raw(1, k);
    re += mag * std::cos(ph);
    im += mag * std::sin(ph);
  }
  return {re, im};
}

/// Given dL/dRe(R), dL/dIm(R) for the rendered sum over a column block,
/// writes the matching dL/d(raw head outputs).
inline void render_columns_backward(const StageTape& tape, Eigen::Index first, Eigen::Index count,
                                    std::complex<double> d_r, Eigen::MatrixXd& d_s_raw, Eigen::MatrixXd& d_t_raw) {
  for (Eigen::Index k = first; k < first + count; ++k) {
    const double s0 = tape.s_raw(0, k);
    const double t0 = tape.t_raw(0, k);
    const double amp_s = softplus(s0);
    const double amp_t = softplus(t0);
    const double ph = tape.s_raw(1, k) + tape.t_raw(1, k);
    const double c = std::cos(ph);
    const double s = std::sin(ph);
    const double d_mag = d_r.real() * c + d_r.imag() * s;
    const double d_ph = amp_s * amp_t * (-d_r.real() * s + d_r.imag() * c);
    d_s_raw(0, k) = d_mag * amp_t * sigmoid(s0);
    d_s_raw(1, k) = d_ph;
    d_t_raw(0, k) = d_mag * amp_s * sigmoid(t0);
    d_t_raw(1, k) = d_ph;
  }
}

/// Gradient of ln|R| w.r.t. (Re R, Im R), packed as a complex number.
inline std::complex<double> dlog_abs(std::complex<double> r) { return r / std::norm(r); }

struct BatchResult {
  std::vector<double> predictions_db;
  double loss = 0.0;  // standardized MSE; 0 when no targets are used
  std::size_t floor_hits = 0;
};

struct BatchOptions {
  // Upper bound on voxel columns pushed through a stage in one block.
  Eigen::Index max_columns = 4096;
};

namespace detail {

inline constexpr double kDbPerNeper = 20.0 / std::numbers::ln10;

inline void check_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericFailure(std::string("non-finite prediction in ") + where);
  }
}

struct StageBlockPlan {
  std::size_t first;
  std::size_t count;
};

inline std::vector<StageBlockPlan> plan_blocks(std::size_t items, std::size_t voxels_per_item, Eigen::Index max_columns) {
  const std::size_t per_block =
      std::max<std::size_t>(1, static_cast<std::size_t>(max_columns) / std::max<std::size_t>(1, voxels_per_item));
  std::vector<StageBlockPlan> plan;
  for (std::size_t i = 0; i < items; i += per_block) plan.push_back({i, std::min(per_block, items - i)});
  return plan;
}

struct StageJob {
  Point3 origin;
  Point3 emitter;
  const Point3* extra = nullptr;
};

inline void stack_inputs(const Model& model, std::span<const StageJob> jobs, Eigen::MatrixXd& position,
                         Eigen::MatrixXd& conditioning) {
  const auto v = static_cast<Eigen::Index>(model.rays.ray_count * model.rays.samples_per_ray);
  const auto n = static_cast<Eigen::Index>(jobs.size());
  position.resize(static_cast<Eigen::Index>(model.spec.position_dim()), v * n);
  conditioning.resize(static_cast<Eigen::Index>(model.spec.conditioning_dim()), v * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    const RayBundle bundle = build_ray_bundle(job.origin, model.rays);
    StageInputs in = build_stage_inputs(bundle, job.emitter, model.spec, model.bounds, job.extra);
    position.middleCols(j * v, v) = in.position;
    conditioning.middleCols(j * v, v) = in.conditioning;
  }
}

}  // namespace detail

/// Forward pass over a batch and, when `grads` is non-null, exact reverse-mode
/// gradients of the standardized MSE accumulated into `grads`.
/// `targets` may be empty for prediction only.
inline BatchResult evaluate_batch(const Model& model, std::span<const Point3> tx, std::span<const Point3> ris,
                                  std::span<const Point3> rx, std::span<const double> targets, ModelParams* grads,
                                  const BatchOptions& opts = {}) {
  const std::size_t b = rx.size();
  if (tx.size() != b || ris.size() != b) throw InvalidArgument("evaluate_batch: placement arrays differ in length");
  if (!targets.empty() && targets.size() != b) throw InvalidArgument("evaluate_batch: target count mismatch");
  if (grads != nullptr && targets.empty()) throw InvalidArgument("evaluate_batch: gradients need targets");
  BatchResult out;
  out.predictions_db.assign(b, 0.0);
  if (b == 0) return out;

  const double sigma = model.targets.stddev;
  const double mean = model.targets.mean;
  const double inv_b = 1.0 / static_cast<double>(b);
  // dL/dy for prediction y_i in dB.
  auto loss_grad = [&](std::size_t i, double y) { return 2.0 * (y - targets[i]) * inv_b / (sigma * sigma); };
  auto add_loss = [&](std::size_t i, double y) {
    const double r = (y - targets[i]) / sigma;
    out.loss += r * r * inv_b;
  };

  if (model.spec.kind == ModelKind::direct_mlp) {
    const auto pd = static_cast<Eigen::Index>(model.spec.position_dim());
    const auto& net = model.params.direct;
    for (const auto& blk : detail::plan_blocks(b, 1, opts.max_columns)) {
      const auto n = static_cast<Eigen::Index>(blk.count);
      std::vector<Eigen::MatrixXd> acts;
      acts.reserve(net.hidden.size() + 1);
      acts.emplace_back(3 * pd, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const std::size_t i = blk.first + static_cast<std::size_t>(j);
        double* col = acts[0].col(j).data();
        encode_position_into(tx[i], model.spec, model.bounds, col);
        encode_position_into(ris[i], model.spec, model.bounds, col + pd);
        encode_position_into(rx[i], model.spec, model.bounds, col + 2 * pd);
      }
      for (const auto& layer : net.hidden) {
        Eigen::MatrixXd h = detail::affine(layer, acts.back());
        detail::relu_inplace(h);
        acts.push_back(std::move(h));
      }
      const Eigen::MatrixXd z = detail::affine(net.head, acts.back());
      Eigen::MatrixXd dz(1, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const std::size_t i = blk.first + static_cast<std::size_t>(j);
        const double y = mean + sigma * z(0, j);
        out.predictions_db[i] = y;
        if (!targets.empty()) {
          add_loss(i, y);
          dz(0, j) = loss_grad(i, y) * sigma;
        }
      }
      if (grads != nullptr) {
        auto& g = grads->direct;
        Eigen::MatrixXd d = detail::affine_backward(net.head, acts.back(), dz, g.head);
        for (std::size_t k = net.hidden.size(); k-- > 0;) {
          detail::relu_backward_inplace(d, acts[k + 1]);
          d = detail::affine_backward(net.hidden[k], acts[k], d, g.hidden[k], k > 0);
        }
      }
    }
    detail::check_finite(out.predictions_db, "direct network");
    return out;
  }

  const auto v = static_cast<Eigen::Index>(model.rays.ray_count * model.rays.samples_per_ray);
  const bool two_stage = model.spec.kind == ModelKind::two_stage;

  // Stage 1 depends only on (TX, RIS); render each distinct pair once.
  std::vector<std::size_t> key_of(b, 0);
  std::vector<detail::StageJob> stage1_jobs;
  std::vector<std::complex<double>> r1;
  std::vector<StageTape> stage1_tapes;
  std::vector<detail::StageBlockPlan> stage1_plan;
  if (two_stage) {
    std::map<std::tuple<double, double, double, double, double, double>, std::size_t> keys;
    for (std::size_t i = 0; i < b; ++i) {
      const auto key = std::make_tuple(tx[i].x, tx[i].y, tx[i].z, ris[i].x, ris[i].y, ris[i].z);
      auto [it, inserted] = keys.emplace(key, stage1_jobs.size());
      if (inserted) stage1_jobs.push_back({ris[i], tx[i], nullptr});
      key_of[i] = it->second;
    }
    r1.resize(stage1_jobs.size());
    stage1_plan = detail::plan_blocks(stage1_jobs.size(), static_cast<std::size_t>(v), opts.max_columns);
    for (const auto& blk : stage1_plan) {
      Eigen::MatrixXd pos, cond;
      detail::stack_inputs(model, std::span(stage1_jobs).subspan(blk.first, blk.count), pos, cond);
      stage1_tapes.push_back(stage_forward(model.params.stage1, pos, cond));
      for (std::size_t j = 0; j < blk.count; ++j) {
        r1[blk.first + j] = render_columns(stage1_tapes.back(), static_cast<Eigen::Index>(j) * v, v);
      }
    }
  }

  std::vector<std::complex<double>> d_r1(stage1_jobs.size(), {0.0, 0.0});
  std::vector<detail::StageJob> stage2_jobs(b);
  for (std::size_t i = 0; i < b; ++i) stage2_jobs[i] = {rx[i], ris[i], two_stage ? nullptr : &ris[i]};

  for (const auto& blk : detail::plan_blocks(b, static_cast<std::size_t>(v), opts.max_columns)) {
    Eigen::MatrixXd pos, cond;
    detail::stack_inputs(model, std::span(stage2_jobs).subspan(blk.first, blk.count), pos, cond);
    const StageTape tape = stage_forward(model.params.stage2, pos, cond);
    Eigen::MatrixXd d_s, d_t;
    if (grads != nullptr) {
      d_s = Eigen::MatrixXd::Zero(2, tape.columns());
      d_t = Eigen::MatrixXd::Zero(2, tape.columns());
    }
    for (std::size_t j = 0; j < blk.count; ++j) {
      const std::size_t i = blk.first + j;
      const auto first = static_cast<Eigen::Index>(j) * v;
      const std::complex<double> r2 = render_columns(tape, first, v);
      const std::complex<double> total = two_stage ? r1[key_of[i]] * r2 : r2;
      const PhasorSignal signal = from_complex(total);
      const double y = strength_db(signal, model.floor_eps);
      out.predictions_db[i] = y;
      const bool floored = !(signal.amplitude > model.floor_eps);
      if (floored) ++out.floor_hits;
      if (targets.empty()) continue;
      add_loss(i, y);
      if (grads == nullptr || floored) continue;  // the floor is flat
      const double dy = loss_grad(i, y) * detail::kDbPerNeper;
      render_columns_backward(tape, first, v, dy * dlog_abs(r2), d_s, d_t);
      if (two_stage) d_r1[key_of[i]] += dy * dlog_abs(r1[key_of[i]]);
    }
    if (grads != nullptr) stage_backward(model.params.stage2, tape, d_s, d_t, grads->stage2);
  }

  if (two_stage && grads != nullptr) {
    for (std::size_t t = 0; t < stage1_plan.size(); ++t) {
      const auto& blk = stage1_plan[t];
      const StageTape& tape = stage1_tapes[t];
      Eigen::MatrixXd d_s = Eigen::MatrixXd::Zero(2, tape.columns());
      Eigen::MatrixXd d_t = Eigen::MatrixXd::Zero(2, tape.columns());
      for (std::size_t j = 0; j < blk.count; ++j) {
        render_columns_backward(tape, static_cast<Eigen::Index>(j) * v, v, d_r1[blk.first + j], d_s, d_t);
      }
      stage_backward(model.params.stage1, tape, d_s, d_t, grads->stage1);
    }
  }
  detail::check_finite(out.predictions_db, "rendered network");
  return out;
}

inline BatchResult evaluate_batch(const Model& model, std::span<const SceneSample> batch, ModelParams* grads,
                                  const BatchOptions& opts = {}) {
  std::vector<Point3> tx, ris, rx;
  std::vector<double> targets;
  tx.reserve(batch.size());
  ris.reserve(batch.size());
  rx.reserve(batch.size());
  targets.reserve(batch.size());
  for (const auto& s : batch) {
    tx.push_back(s.tx);
    ris.push_back(s.ris);
    rx.push_back(s.rx);
    targets.push_back(s.strength_db);
  }
  return evaluate_batch(model, tx, ris, rx, targets, grads, opts);
}

/// Predicted dB for every sample (labels ignored).
inline std::vector<double> predict_batch(const Model& model, std::span<const SceneSample> samples,
                                         std::size_t chunk = 256) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += chunk) {
    const auto part = samples.subspan(i, std::min(chunk, samples.size() - i));
    std::vector<Point3> tx, ris, rx;
    for (const auto& s : part) {
      tx.push_back(s.tx);
      ris.push_back(s.ris);
      rx.push_back(s.rx);
    }
    const auto r = evaluate_batch(model, tx, ris, rx, {}, nullptr);
    out.insert(out.end(), r.predictions_db.begin(), r.predictions_db.end());
  }
  return out;
}

/// Gradient of the standardized batch MSE with respect to every parameter.
inline ModelParams backward(const Model& model, std::span<const SceneSample> batch) {
  if (batch.empty()) throw InvalidArgument("backward: empty batch");
  ModelParams grads = zeros_like(model.params);
  evaluate_batch(model, batch, &grads);
  bool finite = true;
  for_each_layer(grads, [&](const std::string&, const DenseLayer& l) {
    finite = finite && l.weights.allFinite() && l.biases.allFinite();
  });
  if (!finite) throw NumericFailure("non-finite gradient in batch of " + std::to_string(batch.size()) + " samples");
  return grads;
}

}  // namespace rnerf
