// Generate oracle data, train a small two-stage model and print test metrics.

#include <cstdio>

#include "rnerf/rnerf.hpp"

int main() {
  using namespace rnerf;
  const ScenarioConfig scenario;
  const OracleConfig oracle;
  const auto data = generate_dataset(scenario, 1000, oracle, 1);
  const auto split = split_dataset(data, {0.8, 7});

  ExperimentSetup setup;
  setup.spec = {ModelKind::two_stage, 16, 4, true, 6};
  setup.bounds = scene_bounds(scenario);
  setup.rays = {6, 3, 0.0, setup.bounds.diagonal()};
  setup.train.epochs = 10;

  const FittedModel fit = fit_and_score(split.train, split.test, setup, ModelKind::two_stage, true, 1);
  const MetricReport mri = metrics(MriBaseline(split.train).predict(split.test), truths(split.test));
  std::printf("two-stage  MAE %.3f dB  MED %.3f dB  RMSE %.3f dB\n", fit.test_metrics.mae, fit.test_metrics.med,
              fit.test_metrics.rmse);
  std::printf("mri        MAE %.3f dB  MED %.3f dB  RMSE %.3f dB\n", mri.mae, mri.med, mri.rmse);
  const double db = predict_strength(fit.trained.model, scenario.tx, scenario.ris_candidates[0], {1.75, 6.0, 0.0});
  std::printf("predicted strength at (1.75, 6, 0) with RIS 0: %.3f dB\n", db);
}
