#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rnerf/encoding.hpp"
#include "rnerf/errors.hpp"
#include "rnerf/geometry.hpp"
#include "rnerf/radiometry.hpp"

namespace rnerf {

/// Affine layer y = W x + b with W stored out x in.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;

  DenseLayer() = default;
  DenseLayer(Eigen::Index out, Eigen::Index in) : weights(Eigen::MatrixXd::Zero(out, in)), biases(Eigen::VectorXd::Zero(out)) {}

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
  bool empty() const { return weights.size() == 0; }
};

/// One stage F_theta: a transmission network (TN) producing T and a feature
/// vector per voxel, followed by a radiation network (RN) producing S.
struct StageNetwork {
  std::vector<DenseLayer> tn;  // hidden, ReLU
  DenseLayer t_head;           // -> (raw amplitude, phase)
  DenseLayer feature_head;     // -> feature, affine
  std::vector<DenseLayer> rn;  // hidden, ReLU
  DenseLayer s_head;           // -> (raw amplitude, phase)

  bool empty() const { return tn.empty(); }
};

/// Plain MLP regressor used by the direct baseline.
struct DenseStack {
  std::vector<DenseLayer> hidden;  // ReLU
  DenseLayer head;                 // affine, 1 output

  bool empty() const { return hidden.empty(); }
};

enum class ModelKind { two_stage, single_stage, direct_mlp };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::two_stage: return "two-stage";
    case ModelKind::single_stage: return "single-stage";
    case ModelKind::direct_mlp: return "mlp";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "two-stage") return ModelKind::two_stage;
  if (s == "single-stage") return ModelKind::single_stage;
  if (s == "mlp") return ModelKind::direct_mlp;
  throw InvalidArgument("unknown model kind '" + s + "'");
}

/// Architecture hyper-parameters. Defaults:
/// TN 8 x 256, feature 256, RN 256 then 128, L = 10.
struct ModelSpec {
  ModelKind kind = ModelKind::two_stage;
  std::size_t width = 256;
  std::size_t tn_depth = 8;
  bool use_pe = true;
  std::size_t levels = 10;

  void validate() const {
    if (width < 2) throw InvalidArgument("model width must be >= 2");
    if (tn_depth < 1) throw InvalidArgument("model tn_depth must be >= 1");
    if (levels < 1) throw InvalidArgument("model levels must be >= 1");
  }

  // Positions carry the raw coordinates next to their Fourier features;
  // directions carry only the Fourier features. Without PE both are raw.
  EncodingConfig position_encoding() const { return {levels, true}; }
  EncodingConfig direction_encoding() const { return {levels, false}; }
  std::size_t position_dim() const { return use_pe ? encoded_size(3, position_encoding()) : 3; }
  std::size_t direction_dim() const { return use_pe ? encoded_size(3, direction_encoding()) : 3; }
  std::size_t extra_dim() const { return kind == ModelKind::single_stage ? position_dim() : 0; }
  std::size_t feature_dim() const { return width; }
  std::size_t rn_second_width() const { return width / 2; }
  std::size_t conditioning_dim() const { return position_dim() + direction_dim() + extra_dim(); }
  std::size_t tn_input_dim() const { return position_dim(); }
  std::size_t rn_input_dim() const { return conditioning_dim() + feature_dim(); }
  std::size_t direct_input_dim() const { return 3 * position_dim(); }
};

/// All trainable tensors. Also used as the gradient / moment container, so
/// every tensor here has a twin of identical shape in those roles.
struct ModelParams {
  StageNetwork stage1;  // TX -> RIS, origin at the RIS (two-stage only)
  StageNetwork stage2;  // RIS -> RX, origin at the RX (also the single-stage network)
  DenseStack direct;    // direct baseline only
};

/// Canonical tensor order; checkpoints and the optimizer rely on it.
template <class Params, class Fn>
void for_each_layer(Params& params, Fn&& fn) {
  auto stage = [&](auto& net, const std::string& prefix) {
    if (net.empty()) return;
    for (std::size_t i = 0; i < net.tn.size(); ++i) fn(prefix + ".tn." + std::to_string(i), net.tn[i]);
    fn(prefix + ".t_head", net.t_head);
    fn(prefix + ".feature_head", net.feature_head);
    for (std::size_t i = 0; i < net.rn.size(); ++i) fn(prefix + ".rn." + std::to_string(i), net.rn[i]);
    fn(prefix + ".s_head", net.s_head);
  };
  stage(params.stage1, "stage1");
  stage(params.stage2, "stage2");
  if (!params.direct.empty()) {
    for (std::size_t i = 0; i < params.direct.hidden.size(); ++i)
      fn("direct." + std::to_string(i), params.direct.hidden[i]);
    fn("direct.head", params.direct.head);
  }
}

inline std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_layer(params, [&](const std::string&, const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  });
  return n;
}

inline ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for_each_layer(out, [](const std::string&, DenseLayer& l) {
    l.weights.setZero();
    l.biases.setZero();
  });
  return out;
}

namespace detail {

inline StageNetwork make_stage(const ModelSpec& spec) {
  StageNetwork net;
  const auto w = static_cast<Eigen::Index>(spec.width);
  Eigen::Index in = static_cast<Eigen::Index>(spec.tn_input_dim());
  for (std::size_t i = 0; i < spec.tn_depth; ++i) {
    net.tn.emplace_back(w, in);
    in = w;
  }
  net.t_head = DenseLayer(2, w);
  net.feature_head = DenseLayer(static_cast<Eigen::Index>(spec.feature_dim()), w);
  const auto w2 = static_cast<Eigen::Index>(spec.rn_second_width());
  net.rn.emplace_back(w, static_cast<Eigen::Index>(spec.rn_input_dim()));
  net.rn.emplace_back(w2, w);
  net.s_head = DenseLayer(2, w2);
  return net;
}

inline DenseStack make_direct(const ModelSpec& spec) {
  // Same depth/width budget as one stage: tn_depth + 1 layers of `width`,
  // then one of width / 2.
  DenseStack net;
  const auto w = static_cast<Eigen::Index>(spec.width);
  Eigen::Index in = static_cast<Eigen::Index>(spec.direct_input_dim());
  for (std::size_t i = 0; i < spec.tn_depth + 1; ++i) {
    net.hidden.emplace_back(w, in);
    in = w;
  }
  const auto w2 = static_cast<Eigen::Index>(spec.rn_second_width());
  net.hidden.emplace_back(w2, in);
  net.head = DenseLayer(1, w2);
  return net;
}

}  // namespace detail

/// Zero-valued parameters with the shapes implied by `spec`.
inline ModelParams make_params(const ModelSpec& spec) {
  spec.validate();
  ModelParams p;
  switch (spec.kind) {
    case ModelKind::two_stage:
      p.stage1 = detail::make_stage(spec);
      p.stage2 = detail::make_stage(spec);
      break;
    case ModelKind::single_stage:
      p.stage2 = detail::make_stage(spec);
      break;
    case ModelKind::direct_mlp:
      p.direct = detail::make_direct(spec);
      break;
  }
  return p;
}

/// He-style uniform fan-in initialization, biases zero.
inline ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams p = make_params(spec);
  std::mt19937_64 rng(seed);
  for_each_layer(p, [&](const std::string&, DenseLayer& l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < l.weights.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weights.rows(); ++i) l.weights(i, j) = dist(rng);
  });
  return p;
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Mean/std of training targets in dB; the loss is computed in this
/// standardized space.
struct TargetStats {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Everything needed to evaluate a trained network besides its weights.
struct Model {
  ModelSpec spec;
  RayTracingConfig rays;
  SceneBounds bounds;
  TargetStats targets;
  double floor_eps = kDefaultFloorEps;
  ModelParams params;
};

// ---------------------------------------------------------------------------
// Network inputs

/// Direction used to condition a voxel: from the stage's emitter to the
/// voxel. Falls back to the ray direction when they coincide.
inline Direction3 conditioning_direction(const Point3& voxel, const Point3& emitter, const Direction3& ray) {
  const Point3 v = voxel - emitter;
  if (norm(v) < 1e-12) return ray;
  return Direction3::from(v);
}

inline void encode_position_into(const Point3& p, const ModelSpec& spec, const SceneBounds& bounds, double* out) {
  const Point3 q = normalize(p, bounds);
  const double c[3] = {q.x, q.y, q.z};
  if (spec.use_pe) {
    positional_encode_into(c, spec.position_encoding(), out);
  } else {
    out[0] = c[0];
    out[1] = c[1];
    out[2] = c[2];
  }
}

inline void encode_direction_into(const Direction3& d, const ModelSpec& spec, double* out) {
  const double c[3] = {d.dx, d.dy, d.dz};
  if (spec.use_pe) {
    positional_encode_into(c, spec.direction_encoding(), out);
  } else {
    out[0] = c[0];
    out[1] = c[1];
    out[2] = c[2];
  }
}

/// Column-per-voxel encodings for one stage.
struct StageInputs {
  Eigen::MatrixXd position;      // position_dim x V  (TN input)
  Eigen::MatrixXd conditioning;  // conditioning_dim x V  (RN input minus feature)
};

/// `extra` is the RIS position for the single-stage variant, ignored otherwise.
inline StageInputs build_stage_inputs(const RayBundle& bundle, const Point3& emitter, const ModelSpec& spec,
                                      const SceneBounds& bounds, const Point3* extra = nullptr) {
  const auto v = static_cast<Eigen::Index>(bundle.size());
  const auto pd = static_cast<Eigen::Index>(spec.position_dim());
  const auto dd = static_cast<Eigen::Index>(spec.direction_dim());
  const auto ed = static_cast<Eigen::Index>(spec.extra_dim());
  StageInputs in{Eigen::MatrixXd(pd, v), Eigen::MatrixXd(pd + dd + ed, v)};
  std::vector<double> extra_enc;
  if (ed > 0) {
    if (extra == nullptr) throw InvalidArgument("single-stage inputs need the RIS position");
    extra_enc.resize(static_cast<std::size_t>(ed));
    encode_position_into(*extra, spec, bounds, extra_enc.data());
  }
  for (Eigen::Index k = 0; k < v; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const Point3& p = bundle.voxels[idx];
    const Direction3& ray = bundle.directions[idx / bundle.samples_per_ray];
    encode_position_into(p, spec, bounds, in.position.col(k).data());
    in.conditioning.col(k).head(pd) = in.position.col(k);
    encode_direction_into(conditioning_direction(p, emitter, ray), spec, in.conditioning.col(k).data() + pd);
    for (Eigen::Index e = 0; e < ed; ++e) in.conditioning(pd + dd + e, k) = extra_enc[static_cast<std::size_t>(e)];
  }
  return in;
}

// ---------------------------------------------------------------------------
// Per-voxel forward passes

struct TnOutput {
  PhasorSignal transmission;
  Eigen::VectorXd feature;
};

inline Eigen::VectorXd relu(Eigen::VectorXd v) { return v.cwiseMax(0.0); }

inline TnOutput tn_forward(const StageNetwork& stage, std::span<const double> voxel_encoding) {
  if (stage.empty()) throw InvalidArgument("tn_forward: empty network");
  if (static_cast<Eigen::Index>(voxel_encoding.size()) != stage.tn.front().in_dim()) {
    throw InvalidArgument("tn_forward: input has length " + std::to_string(voxel_encoding.size()) + ", expected " +
                          std::to_string(stage.tn.front().in_dim()));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(voxel_encoding.data(), static_cast<Eigen::Index>(voxel_encoding.size()));
  for (const auto& layer : stage.tn) h = relu(layer.weights * h + layer.biases);
  const Eigen::VectorXd t = stage.t_head.weights * h + stage.t_head.biases;
  return {{softplus(t(0)), t(1)}, stage.feature_head.weights * h + stage.feature_head.biases};
}

inline PhasorSignal rn_forward(const StageNetwork& stage, std::span<const double> feature,
                               std::span<const double> conditioning_encoding) {
  if (stage.empty()) throw InvalidArgument("rn_forward: empty network");
  const auto in_dim = stage.rn.front().in_dim();
  const auto got = static_cast<Eigen::Index>(feature.size() + conditioning_encoding.size());
  if (got != in_dim || static_cast<Eigen::Index>(feature.size()) != stage.feature_head.out_dim()) {
    throw InvalidArgument("rn_forward: input has length " + std::to_string(got) + ", expected " + std::to_string(in_dim));
  }
  Eigen::VectorXd h(in_dim);
  const auto cd = static_cast<Eigen::Index>(conditioning_encoding.size());
  h.head(cd) = Eigen::Map<const Eigen::VectorXd>(conditioning_encoding.data(), cd);
  h.tail(static_cast<Eigen::Index>(feature.size())) =
      Eigen::Map<const Eigen::VectorXd>(feature.data(), static_cast<Eigen::Index>(feature.size()));
  for (const auto& layer : stage.rn) h = relu(layer.weights * h + layer.biases);
  const Eigen::VectorXd s = stage.s_head.weights * h + stage.s_head.biases;
  return {softplus(s(0)), s(1)};
}

/// Renders one stage voxel by voxel from `origin`, conditioning on `emitter`.
inline PhasorSignal render_network_stage(const StageNetwork& stage, const Model& model, const Point3& origin,
                                         const Point3& emitter, const Point3* extra = nullptr) {
  const RayBundle bundle = build_ray_bundle(origin, model.rays);
  const StageInputs in = build_stage_inputs(bundle, emitter, model.spec, model.bounds, extra);
  std::vector<PhasorSignal> s(bundle.size());
  std::vector<PhasorSignal> t(bundle.size());
  for (Eigen::Index k = 0; k < in.position.cols(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const auto tn = tn_forward(stage, std::span<const double>(in.position.col(k).data(), static_cast<std::size_t>(in.position.rows())));
    t[idx] = tn.transmission;
    s[idx] = rn_forward(stage, std::span<const double>(tn.feature.data(), static_cast<std::size_t>(tn.feature.size())),
                        std::span<const double>(in.conditioning.col(k).data(), static_cast<std::size_t>(in.conditioning.rows())));
  }
  return render_stage(std::span<const PhasorSignal>(s), std::span<const PhasorSignal>(t));
}

/// Received strength in dB for one (TX, RIS, RX) placement.
inline double predict_strength(const Model& model, const Point3& tx, const Point3& ris, const Point3& rx) {
  switch (model.spec.kind) {
    case ModelKind::two_stage: {
      const PhasorSignal r1 = render_network_stage(model.params.stage1, model, ris, tx);
      const PhasorSignal r2 = render_network_stage(model.params.stage2, model, rx, ris);
      return strength_db(render_total(r1, r2), model.floor_eps);
    }
    case ModelKind::single_stage:
      return strength_db(render_network_stage(model.params.stage2, model, rx, ris, &ris), model.floor_eps);
    case ModelKind::direct_mlp: {
      const auto pd = static_cast<Eigen::Index>(model.spec.position_dim());
      Eigen::VectorXd h(3 * pd);
      encode_position_into(tx, model.spec, model.bounds, h.data());
      encode_position_into(ris, model.spec, model.bounds, h.data() + pd);
      encode_position_into(rx, model.spec, model.bounds, h.data() + 2 * pd);
      for (const auto& layer : model.params.direct.hidden) h = relu(layer.weights * h + layer.biases);
      const double z = (model.params.direct.head.weights * h + model.params.direct.head.biases)(0);
      return model.targets.mean + model.targets.stddev * z;
    }
  }
  throw InvalidArgument("predict_strength: unknown model kind");
}

}  // namespace rnerf
