#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rnerf/train.hpp"
#include "support.hpp"

using namespace rnerf;
using rnerf::testing::gradcheck_batch;
using rnerf::testing::gradient_check;
using rnerf::testing::tiny_gradcheck_model;

TEST(MseLoss, Examples) {
  const double p[] = {1, 2};
  const double t[] = {1, 2};
  EXPECT_DOUBLE_EQ(mse_loss(p, t), 0.0);
  const double p2[] = {0, 0};
  const double t2[] = {1, 3};
  EXPECT_DOUBLE_EQ(mse_loss(p2, t2), 5.0);
  const double p3[] = {1};
  EXPECT_THROW(mse_loss(p3, t2), InvalidArgument);
  EXPECT_THROW(mse_loss(std::span<const double>{}, std::span<const double>{}), InvalidArgument);
}

TEST(Backward, FiniteDifferencesTwoStage) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto batch = gradcheck_batch(seed);
    const auto r = gradient_check(tiny_gradcheck_model(ModelKind::two_stage, seed), batch);
    EXPECT_LT(r.rel_error, 1e-4) << "seed " << seed;
    EXPECT_LT(r.worst_entry, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, FiniteDifferencesSingleStageAndDirect) {
  for (auto kind : {ModelKind::single_stage, ModelKind::direct_mlp}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto batch = gradcheck_batch(seed);
      const auto r = gradient_check(tiny_gradcheck_model(kind, seed), batch);
      EXPECT_LT(r.rel_error, 1e-4) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(Backward, FiniteDifferencesWithoutEncoding) {
  Model m = tiny_gradcheck_model(ModelKind::two_stage, 3);
  m.spec.use_pe = false;
  m.params = init_params(m.spec, 3);
  EXPECT_LT(gradient_check(m, gradcheck_batch(3)).rel_error, 1e-4);
}

TEST(Backward, ChunkingDoesNotChangeGradients) {
  const Model m = tiny_gradcheck_model(ModelKind::two_stage, 2);
  const auto batch = gradcheck_batch(2);
  ModelParams a = zeros_like(m.params);
  ModelParams b = zeros_like(m.params);
  const auto ra = evaluate_batch(m, batch, &a);
  const auto rb = evaluate_batch(m, batch, &b, BatchOptions{4});
  EXPECT_NEAR(ra.loss, rb.loss, 1e-13);
  EXPECT_LT((a.stage1.tn[0].weights - b.stage1.tn[0].weights).norm(), 1e-12);
  EXPECT_LT((a.stage2.s_head.weights - b.stage2.s_head.weights).norm(), 1e-12);
}

TEST(Backward, FloorHitsGiveZeroGradient) {
  Model m = tiny_gradcheck_model(ModelKind::two_stage, 1);
  m.params.stage1.t_head.weights.setZero();
  m.params.stage1.t_head.biases(0) = -2000.0;
  const auto batch = gradcheck_batch(1);
  ModelParams g = zeros_like(m.params);
  const auto r = evaluate_batch(m, batch, &g);
  EXPECT_EQ(r.floor_hits, batch.size());
  for_each_layer(g, [](const std::string&, const DenseLayer& l) {
    EXPECT_EQ(l.weights.norm(), 0.0);
    EXPECT_EQ(l.biases.norm(), 0.0);
  });
}

TEST(Backward, EmptyBatchRejected) {
  const Model m = tiny_gradcheck_model(ModelKind::two_stage, 1);
  EXPECT_THROW(backward(m, std::span<const SceneSample>{}), InvalidArgument);
}

TEST(AdamStep, FirstStepClosedForm) {
  // With bias correction, the first step moves every parameter by
  // lr * g / (|g| + eps), i.e. about lr * sign(g).
  ModelSpec spec{ModelKind::direct_mlp, 4, 1, false, 1};
  ModelParams p = init_params(spec, 1);
  const ModelParams before = p;
  ModelParams g = zeros_like(p);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for_each_layer(g, [&](const std::string&, DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases.data()[i] = n(rng);
  });
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  OptimizerState st = make_optimizer_state(p);
  adam_step(p, g, st, cfg);
  EXPECT_EQ(st.step, 1u);
  const auto pp = rnerf::testing::parameter_pointers(p);
  auto bp_params = before;
  const auto bp = rnerf::testing::parameter_pointers(bp_params);
  const auto gp = rnerf::testing::parameter_pointers(g);
  for (std::size_t k = 0; k < pp.size(); ++k) {
    const double expect = *bp[k] - 0.01 * *gp[k] / (std::abs(*gp[k]) + cfg.adam_eps);
    EXPECT_NEAR(*pp[k], expect, 1e-15);
  }
}

TEST(AdamStep, SecondStepClosedForm) {
  ModelSpec spec{ModelKind::direct_mlp, 2, 1, false, 1};
  ModelParams p = make_params(spec);
  ModelParams g1 = zeros_like(p), g2 = zeros_like(p);
  g1.direct.head.biases(0) = 2.0;
  g2.direct.head.biases(0) = -1.0;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  OptimizerState st = make_optimizer_state(p);
  adam_step(p, g1, st, cfg);
  adam_step(p, g2, st, cfg);
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  double x = -0.1 * 2.0 / (2.0 + cfg.adam_eps);
  const double m = (1 - b1) * b1 * 2.0 + (1 - b1) * -1.0;
  const double v = (1 - b2) * b2 * 4.0 + (1 - b2) * 1.0;
  x -= 0.1 * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + cfg.adam_eps);
  EXPECT_NEAR(p.direct.head.biases(0), x, 1e-14);
  EXPECT_EQ(st.step, 2u);
}

TEST(AdamStep, ShapeMismatchRejected) {
  ModelParams p = init_params({ModelKind::direct_mlp, 4, 1, false, 1}, 1);
  ModelParams g = init_params({ModelKind::direct_mlp, 6, 1, false, 1}, 1);
  OptimizerState st = make_optimizer_state(p);
  EXPECT_THROW(adam_step(p, g, st, TrainConfig{}), InvalidArgument);
}

TEST(AdamStep, ZeroGradientIsFixedPoint) {
  ModelParams p = init_params({ModelKind::two_stage, 4, 1, true, 1}, 2);
  const ModelParams before = p;
  OptimizerState st = make_optimizer_state(p);
  for (int i = 0; i < 3; ++i) adam_step(p, zeros_like(p), st, TrainConfig{});
  EXPECT_TRUE(p.stage2.rn[0].weights == before.stage2.rn[0].weights);
}

namespace {

std::vector<SceneSample> small_dataset(std::size_t n, std::uint64_t seed) {
  return generate_dataset(ScenarioConfig{}, n, OracleConfig{}, seed);
}

Model small_model(ModelKind kind, std::uint64_t seed, const std::vector<SceneSample>& data) {
  Model m;
  m.spec = {kind, 8, 2, true, 2};
  m.rays = {3, 2, 0.0, 1.0};
  m.bounds = scene_bounds(ScenarioConfig{});
  m.params = init_params(m.spec, seed);
  m.targets = compute_target_stats(data);
  return m;
}

}  // namespace

TEST(Train, LossDecreasesAndIsDeterministic) {
  const auto data = small_dataset(120, 3);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.seed = 11;
  cfg.patience = 0;
  const Model m = small_model(ModelKind::two_stage, 1, data);
  const auto a = train(data, m, cfg);
  const auto b = train(data, m, cfg);
  ASSERT_EQ(a.history.train_loss.size(), 8u);
  EXPECT_LT(a.history.train_loss.back(), a.history.train_loss.front());
  EXPECT_EQ(a.history.train_loss, b.history.train_loss);
  EXPECT_EQ(a.history.val_mae, b.history.val_mae);
  EXPECT_TRUE(a.model.params.stage1.tn[0].weights == b.model.params.stage1.tn[0].weights);
  EXPECT_EQ(a.optimizer.step, 8u * ((108 + 15) / 16));
}

TEST(Train, DirectMlpFitsOracleBetterThanMean) {
  const auto data = small_dataset(400, 5);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.patience = 0;
  const auto r = train(data, small_model(ModelKind::direct_mlp, 2, data), cfg);
  const auto pred = predict_batch(r.model, data);
  const TargetStats st = compute_target_stats(data);
  std::vector<double> mean_pred(data.size(), st.mean);
  EXPECT_LT(mean_abs_error(pred, data), 0.7 * mean_abs_error(mean_pred, data));
}

TEST(Train, EarlyStoppingReturnsBestEpoch) {
  const auto data = small_dataset(80, 9);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.patience = 3;
  const auto r = train(data, small_model(ModelKind::direct_mlp, 2, data), cfg);
  ASSERT_FALSE(r.history.val_mae.empty());
  const auto best = std::min_element(r.history.val_mae.begin(), r.history.val_mae.end());
  EXPECT_EQ(r.history.best_epoch, static_cast<std::size_t>(best - r.history.val_mae.begin()) + 1);
  EXPECT_LE(r.history.val_mae.size(), r.history.best_epoch + 3);
}

TEST(Train, RejectsBadConfig) {
  const auto data = small_dataset(10, 1);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(data, small_model(ModelKind::direct_mlp, 1, data), cfg), InvalidArgument);
  cfg = {};
  cfg.learning_rate = -1;
  EXPECT_THROW(train(data, small_model(ModelKind::direct_mlp, 1, data), cfg), InvalidArgument);
}

TEST(Train, NonFiniteLossAborts) {
  auto data = small_dataset(20, 1);
  Model m = small_model(ModelKind::direct_mlp, 1, data);
  m.params.direct.head.biases(0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(data, m, cfg), NumericFailure);
}

TEST(Train, CalibrationMatchesTargetMeanForRayModels) {
  const auto data = small_dataset(60, 4);
  const double target = compute_target_stats(data).mean;
  for (auto kind : {ModelKind::two_stage, ModelKind::single_stage}) {
    Model m = small_model(kind, 3, data);
    const Model before = m;
    const double shift = calibrate_output_level(m, data, target);
    const auto p = predict_batch(m, data);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size()), target, 1e-3);
    EXPECT_NE(shift, 0.0);
    EXPECT_TRUE(m.params.stage2.tn[0].weights == before.params.stage2.tn[0].weights);
    EXPECT_EQ(m.params.stage2.s_head.biases(0), before.params.stage2.s_head.biases(0) + shift);
  }
  Model direct = small_model(ModelKind::direct_mlp, 3, data);
  const auto p0 = predict_batch(direct, data);
  EXPECT_EQ(calibrate_output_level(direct, data, target), 0.0);
  EXPECT_EQ(predict_batch(direct, data), p0);
}

TEST(Train, CalibrationCanBeDisabled) {
  const auto data = small_dataset(40, 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-12;
  cfg.validation_fraction = 0.0;
  cfg.calibrate_output = false;
  const Model m = small_model(ModelKind::two_stage, 1, data);
  const auto r = train(data, m, cfg);
  EXPECT_NEAR(r.model.params.stage2.s_head.biases(0), m.params.stage2.s_head.biases(0), 1e-9);
}
