#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "rnerf/radiometry.hpp"

using namespace rnerf;

namespace {

VoxelField random_field(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  std::uniform_real_distribution<double> amp(0.0, 2.0);
  std::uniform_real_distribution<double> ph(-10.0, 10.0);
  VoxelField f{m, n, {}, {}};
  for (std::size_t i = 0; i < m * n; ++i) {
    f.signals.push_back({amp(rng), ph(rng)});
    f.transmissions.push_back({amp(rng), ph(rng)});
  }
  return f;
}

// Brute force: independent std::complex accumulation.
std::complex<double> brute_force(const VoxelField& f) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < f.signals.size(); ++i) {
    acc += std::polar(f.signals[i].amplitude, f.signals[i].phase) *
           std::polar(f.transmissions[i].amplitude, f.transmissions[i].phase);
  }
  return acc;
}

}  // namespace

TEST(AnalyticTransmission, Substitution) {
  const RadioConstants unit{1.0, 1.0, 2.0 * std::numbers::pi};
  const auto t = analytic_transmission(1.0, unit);
  EXPECT_DOUBLE_EQ(t.amplitude, 1.0);
  EXPECT_NEAR(t.phase, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(analytic_transmission(4.0, {2.0, 1.0, 1.0}).amplitude, 0.5);
  EXPECT_NEAR(analytic_transmission(0.05, {1.0, 1.0, 0.1}).phase, std::numbers::pi, 1e-14);
}

TEST(AnalyticTransmission, SingularAtZero) {
  EXPECT_THROW(analytic_transmission(0.0, {}), SingularityError);
  EXPECT_THROW(analytic_transmission(-1.0, {}), SingularityError);
}

TEST(AnalyticTransmission, MonotoneInDistance) {
  const RadioConstants c{};
  double prev_amp = std::numeric_limits<double>::infinity();
  double prev_phase = -1.0;
  for (double t = 0.01; t < 20.0; t *= 1.3) {
    const auto s = analytic_transmission(t, c);
    EXPECT_LT(s.amplitude, prev_amp);
    EXPECT_GT(s.phase, prev_phase);
    prev_amp = s.amplitude;
    prev_phase = s.phase;
  }
}

TEST(RenderStage, IdentityProduct) {
  VoxelField f{1, 1, {{1, 0}}, {{1, 0}}};
  const auto r = render_stage(f);
  EXPECT_DOUBLE_EQ(r.amplitude, 1.0);
  EXPECT_DOUBLE_EQ(r.phase, 0.0);
}

TEST(RenderStage, DestructiveInterference) {
  VoxelField f{2, 1, {{1, 0}, {1, std::numbers::pi}}, {{1, 0}, {1, 0}}};
  EXPECT_NEAR(render_stage(f).amplitude, 0.0, 1e-15);
}

TEST(RenderStage, MatchesBruteForceOnSeededField) {
  std::mt19937_64 rng(42);
  const VoxelField f = random_field(rng, 3, 2);
  const auto r = render_stage(f);
  const auto z = brute_force(f);
  EXPECT_NEAR(r.amplitude, std::abs(z), 1e-12 * std::abs(z));
  EXPECT_NEAR(std::abs(r.complex() - z), 0.0, 1e-12 * std::abs(z));
}

TEST(RenderStage, LinearInAmplitude) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    VoxelField f = random_field(rng, 4, 3);
    const auto base = render_stage(f);
    for (auto& s : f.signals) s.amplitude *= 3.5;
    const auto scaled = render_stage(f);
    EXPECT_NEAR(scaled.amplitude, 3.5 * base.amplitude, 1e-12 * scaled.amplitude);
    EXPECT_NEAR(scaled.phase, base.phase, 1e-12);
  }
}

TEST(RenderStage, RejectsEmptyOrInconsistent) {
  EXPECT_THROW(render_stage(VoxelField{}), InvalidArgument);
  VoxelField bad{2, 1, {{1, 0}}, {{1, 0}, {1, 0}}};
  EXPECT_THROW(render_stage(bad), InvalidArgument);
}

TEST(RenderTotal, PhasorMultiplication) {
  const auto r = render_total({2, std::numbers::pi / 2}, {3, std::numbers::pi / 2});
  EXPECT_DOUBLE_EQ(r.amplitude, 6.0);
  EXPECT_NEAR(r.phase, std::numbers::pi, 1e-15);
}

TEST(RenderTotal, Identity) {
  const auto r = render_total({0.7, -1.2}, {1, 0});
  EXPECT_DOUBLE_EQ(r.amplitude, 0.7);
  EXPECT_DOUBLE_EQ(r.phase, -1.2);
}

TEST(RenderTotal, WrapsIntoHalfOpenInterval) {
  const auto r = render_total({1.5, 2.9}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(r.amplitude, 3.0);
  // Rectangular-form check.
  const std::complex<double> z = std::polar(1.5, 2.9) * std::polar(2.0, 1.0);
  EXPECT_NEAR(r.phase, std::arg(z), 1e-12);
  EXPECT_NEAR(r.phase, 3.9 - 2.0 * std::numbers::pi, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ph(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const auto w = render_total({1, ph(rng)}, {1, ph(rng)});
    EXPECT_GT(w.phase, -std::numbers::pi);
    EXPECT_LE(w.phase, std::numbers::pi);
  }
  EXPECT_DOUBLE_EQ(wrap_phase(-std::numbers::pi), std::numbers::pi);
}

TEST(StrengthDb, Conversion) {
  EXPECT_DOUBLE_EQ(strength_db({1, 0}, 1e-8), 0.0);
  EXPECT_DOUBLE_EQ(strength_db({10, 0}, 1e-8), 20.0);
  EXPECT_NEAR(strength_db({0, 0}, 1e-8), -160.0, 1e-12);
  EXPECT_THROW(strength_db({1, 0}, 0.0), InvalidArgument);
}
