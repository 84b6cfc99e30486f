#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rnerf/autodiff.hpp"
#include "rnerf/scene_oracle.hpp"

namespace rnerf::testing {

struct GradCheck {
  double rel_error = 0.0;     // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double worst_entry = 0.0;   // largest per-entry error relative to the gradient's max magnitude
  std::size_t parameters = 0;
};

inline std::vector<double*> parameter_pointers(ModelParams& p) {
  std::vector<double*> out;
  for_each_layer(p, [&](const std::string&, DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) out.push_back(l.weights.data() + i);
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) out.push_back(l.biases.data() + i);
  });
  return out;
}

/// Central differences on every parameter against the reverse-mode gradient.
inline GradCheck gradient_check(Model model, std::span<const SceneSample> batch, double h = 1e-6) {
  ModelParams grads = backward(model, batch);
  const auto analytic = parameter_pointers(grads);
  const auto params = parameter_pointers(model.params);
  auto loss = [&]() { return evaluate_batch(model, batch, nullptr).loss; };
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0, amax = 0.0, worst = 0.0;
  std::vector<double> numeric(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double up = loss();
    *params[k] = saved - h;
    const double down = loss();
    *params[k] = saved;
    numeric[k] = (up - down) / (2.0 * h);
    amax = std::max(amax, std::abs(*analytic[k]));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double d = *analytic[k] - numeric[k];
    diff2 += d * d;
    a2 += *analytic[k] * *analytic[k];
    n2 += numeric[k] * numeric[k];
    worst = std::max(worst, std::abs(d) / std::max(amax, 1e-300));
  }
  return {std::sqrt(diff2) / std::max(std::sqrt(std::max(a2, n2)), 1e-300), worst, params.size()};
}

/// Tiny two-stage configuration used for gradient checks.
inline Model tiny_gradcheck_model(ModelKind kind, std::uint64_t seed) {
  Model m;
  m.spec = {kind, 8, 2, true, 2};
  m.rays = {2, 2, 0.0, 1.0};
  m.bounds = {{-1, -2, -1.5}, {3, 8, 1.5}};
  m.targets = {-2.0, 3.0};
  m.params = init_params(m.spec, seed);
  std::mt19937_64 rng(seed * 31 + 1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for_each_layer(m.params, [&](const std::string&, DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases(i) = u(rng);
  });
  return m;
}

/// Batch with a repeated (TX, RIS) pair so the shared first stage accumulates.
inline std::vector<SceneSample> gradcheck_batch(std::uint64_t seed) {
  ScenarioConfig scenario;
  auto s = generate_dataset(scenario, 3, OracleConfig{}, seed);
  SceneSample dup = s[0];
  dup.rx = {dup.rx.x - 0.3, dup.rx.y + 0.2, dup.rx.z + 0.1};
  dup.strength_db += 1.0;
  s.push_back(dup);
  return s;
}

}  // namespace rnerf::testing
