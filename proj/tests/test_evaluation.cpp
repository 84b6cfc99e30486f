#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rnerf/evaluation.hpp"
#include "rnerf/report.hpp"
#include "rnerf/scene_oracle.hpp"

using namespace rnerf;

TEST(Metrics, Identical) {
  const double a[] = {1.0, -2.0, 3.5};
  const auto r = metrics(a, a);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.med, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.count, 3u);
}

TEST(Metrics, OneTwoThree) {
  const double p[] = {1, 2, 3};
  const double t[] = {0, 0, 0};
  const auto r = metrics(p, t);
  EXPECT_DOUBLE_EQ(r.mae, 2.0);
  EXPECT_DOUBLE_EQ(r.med, 2.0);
  EXPECT_NEAR(r.rmse, std::sqrt(14.0 / 3.0), 1e-15);
  EXPECT_NEAR(r.rmse, 2.160, 1e-3);
}

TEST(Metrics, EvenCountMedian) {
  const double p[] = {0, 4};
  const double t[] = {0, 0};
  const auto r = metrics(p, t);
  EXPECT_DOUBLE_EQ(r.mae, 2.0);
  EXPECT_DOUBLE_EQ(r.med, 2.0);
  EXPECT_NEAR(r.rmse, std::sqrt(8.0), 1e-15);
}

TEST(Metrics, LengthMismatch) {
  const double p[] = {0, 4};
  const double t[] = {0};
  EXPECT_THROW(metrics(p, t), InvalidArgument);
  EXPECT_THROW(metrics(std::span<const double>{}, std::span<const double>{}), InvalidArgument);
}

TEST(Metrics, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t len = 1 + rng() % 50;
    std::vector<double> p(len), t(len);
    double max_err = 0.0, mean_err = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      p[i] = n(rng);
      t[i] = n(rng);
      max_err = std::max(max_err, std::abs(p[i] - t[i]));
      mean_err += (t[i] - p[i]) / static_cast<double>(len);
    }
    const auto r = metrics(p, t);
    EXPECT_GE(r.mae, 0.0);
    EXPECT_GE(r.med, 0.0);
    EXPECT_GE(r.rmse + 1e-12, r.mae);
    EXPECT_GE(r.rmse + 1e-12, std::abs(mean_err));
    EXPECT_LE(r.med, max_err);
  }
}

TEST(ErrorCdf, Example) {
  const double p[] = {1, 3, 7};
  const double t[] = {0, 0, 0};
  const double th[] = {2, 5, 10};
  const auto c = error_cdf(p, t, th);
  EXPECT_DOUBLE_EQ(c[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(c[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c[2], 1.0);
  const double lo[] = {0.5};
  EXPECT_EQ(error_cdf(p, t, lo)[0], 0.0);
  const double hi[] = {7.0};
  EXPECT_EQ(error_cdf(p, t, hi)[0], 1.0);
}

TEST(ErrorCdf, UnsortedRejected) {
  const double p[] = {1};
  const double t[] = {0};
  const double th[] = {2, 1};
  EXPECT_THROW(error_cdf(p, t, th), InvalidArgument);
}

TEST(ErrorCdf, MonotoneOnRandomInputs) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(0.3);
  const auto th = default_cdf_thresholds();
  ASSERT_EQ(th.size(), 81u);
  EXPECT_EQ(th.front(), 0.0);
  EXPECT_EQ(th.back(), 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(37), t(37, 0.0);
    for (auto& x : p) x = e(rng);
    const auto c = error_cdf(p, t, th);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i], c[i - 1]);
    EXPECT_LE(c.back(), 1.0);
    EXPECT_GE(c.front(), 0.0);
  }
}

TEST(MriBaseline, ExactAtTrainingPoints) {
  const auto train = generate_dataset(ScenarioConfig{}, 300, OracleConfig{}, 4);
  const MriBaseline mri(train);
  for (const auto& s : train) EXPECT_NEAR(mri.predict(s.tx, s.ris, s.rx), s.strength_db, 1e-9);
}

TEST(MriBaseline, TwoPointsEquidistant) {
  const Point3 tx{0, -1, 0}, ris{0, 0, 0};
  const std::vector<SceneSample> train = {{tx, ris, {-1, 5, 0}, -3.0}, {tx, ris, {1, 5, 0}, 5.0}};
  const MriBaseline mri(train);
  const Point3 q{0, 5, 0};
  const double r0 = train[0].strength_db - mri.trend(tx, ris, train[0].rx);
  const double r1 = train[1].strength_db - mri.trend(tx, ris, train[1].rx);
  EXPECT_NEAR(mri.predict(tx, ris, q), mri.trend(tx, ris, q) + 0.5 * (r0 + r1), 1e-12);
  // Both training paths have the same length, so the trend is flat.
  EXPECT_DOUBLE_EQ(mri.slope(), 0.0);
  EXPECT_NEAR(mri.predict(tx, ris, q), 1.0, 1e-12);
}

TEST(MriBaseline, ConstantTrainingSet) {
  std::vector<SceneSample> train = generate_dataset(ScenarioConfig{}, 50, OracleConfig{}, 2);
  for (auto& s : train) s.strength_db = 4.25;
  const MriBaseline mri(train);
  const auto q = generate_dataset(ScenarioConfig{}, 30, OracleConfig{}, 9);
  for (const auto& s : q) EXPECT_NEAR(mri.predict(s.tx, s.ris, s.rx), 4.25, 1e-9);
}

TEST(MriBaseline, FallsBackToAllSamples) {
  const Point3 tx{0, -1, 0};
  const std::vector<SceneSample> train = {{tx, {0, 0, 0}, {0, 5, 0}, 2.0}};
  EXPECT_NEAR(mri_baseline(train, tx, {0.5, 0.5, 0}, {1, 6, 0}), 2.0, 1e-12);
  EXPECT_THROW(mri_baseline(std::span<const SceneSample>{}, tx, tx, tx), InvalidArgument);
}

TEST(MriBaseline, RecoversLogDistanceTrend) {
  // Labels exactly a + b * 10 log10(d): the fit recovers a and b.
  std::vector<SceneSample> train = generate_dataset(ScenarioConfig{}, 80, OracleConfig{}, 6);
  for (auto& s : train) s.strength_db = 7.0 - 2.0 * 10.0 * std::log10(distance(s.tx, s.ris) + distance(s.ris, s.rx));
  const MriBaseline mri(train);
  EXPECT_NEAR(mri.slope(), -2.0, 1e-9);
  EXPECT_NEAR(mri.intercept(), 7.0, 1e-8);
}

TEST(Median, OddEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(Ablation, GridLayoutAndLabels) {
  const auto grid = default_ablation_grid();
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(ablation_label(grid[0]), "ray-tracing+pe");
  EXPECT_EQ(ablation_label(grid[1]), "ray-tracing-pe");
  EXPECT_EQ(ablation_label(grid[2]), "no-ray-tracing+pe");
  EXPECT_EQ(ablation_label(grid[3]), "no-ray-tracing-pe");
}

TEST(Ablation, FourFiniteRowsOnSmokeScene) {
  const auto data = generate_dataset(ScenarioConfig{}, 60, OracleConfig{}, 1);
  const auto split = split_dataset(data, {0.8, 1});
  ExperimentSetup setup;
  setup.spec = {ModelKind::two_stage, 8, 1, true, 2};
  setup.rays = {2, 2, 0.0, 1.0};
  setup.bounds = scene_bounds(ScenarioConfig{});
  setup.train.epochs = 2;
  setup.train.batch_size = 16;
  const auto rows = run_ablation(split.train, split.test, setup, default_ablation_grid(), 3);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(std::isfinite(r.metrics.mae));
    EXPECT_TRUE(std::isfinite(r.metrics.rmse));
    EXPECT_EQ(r.metrics.count, split.test.size());
  }
}

TEST(Baselines, SingleStageAndMlpAreSeedDeterministic) {
  const auto data = generate_dataset(ScenarioConfig{}, 40, OracleConfig{}, 2);
  ExperimentSetup setup;
  setup.spec = {ModelKind::two_stage, 8, 1, true, 2};
  setup.rays = {2, 2, 0.0, 1.0};
  setup.bounds = scene_bounds(ScenarioConfig{});
  setup.train.epochs = 2;
  setup.train.batch_size = 8;
  const auto a = single_stage_train(data, setup, 4);
  const auto b = single_stage_train(data, setup, 4);
  EXPECT_EQ(a.model.spec.kind, ModelKind::single_stage);
  EXPECT_EQ(predict_batch(a.model, data), predict_batch(b.model, data));
  const auto m1 = mlp_baseline_train(data, setup, 4, true);
  const auto m2 = mlp_baseline_train(data, setup, 4, true);
  EXPECT_EQ(mlp_baseline_predict(m1.model, data), mlp_baseline_predict(m2.model, data));
  EXPECT_THROW(mlp_baseline_predict(a.model, data), InvalidArgument);
}

TEST(Report, TableAndCsv) {
  std::vector<NamedReport> rows = {{"two-stage", {1.5, 1.25, 2.0, 10}}, {"mri", {3.0, 2.0, 4.0, 10}}};
  std::ostringstream table, csv;
  write_metric_table(table, rows);
  write_metric_csv(csv, rows);
  EXPECT_NE(table.str().find("MAE_dB"), std::string::npos);
  EXPECT_NE(table.str().find("two-stage"), std::string::npos);
  const std::string c = csv.str();
  EXPECT_EQ(c.substr(0, c.find('\n')), "method,metric,value");
  EXPECT_NE(c.find("two-stage,mae,1.5"), std::string::npos);
  EXPECT_NE(c.find("mri,rmse,4"), std::string::npos);
  EXPECT_NE(c.find("two-stage,med,1.25"), std::string::npos);
}
