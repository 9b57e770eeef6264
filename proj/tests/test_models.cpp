#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "regen/models/ctmc.hpp"
#include "regen/models/diffusion.hpp"
#include "regen/models/spinflip.hpp"
#include "regen/resolvent.hpp"
#include "regen/stats.hpp"

namespace {

using namespace regen;

void expect_rows_sum_to_zero(const CtmcModel& m) {
  for (Eigen::Index i = 0; i < m.generator().rows(); ++i) {
    EXPECT_NEAR(m.generator().row(i).sum(), 0.0, 1e-12);
  }
}

TEST(TwoState, GeneratorAndStationaryMeasure) {
  const auto m = build_two_state_ctmc(1.0, 3.0);
  EXPECT_DOUBLE_EQ(m.generator()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(m.generator()(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(m.generator()(1, 0), 3.0);
  EXPECT_DOUBLE_EQ(m.generator()(1, 1), -3.0);
  const auto mu = stationary_measure(m);
  EXPECT_NEAR(mu[0], 0.75, 1e-14);
  EXPECT_NEAR(mu[1], 0.25, 1e-14);
  const auto sym = stationary_measure(build_two_state_ctmc(1.0, 1.0));
  EXPECT_NEAR(sym[0], 0.5, 1e-14);
  expect_rows_sum_to_zero(m);
}

TEST(TwoState, RejectsNonPositiveRate) {
  EXPECT_THROW(build_two_state_ctmc(0.0, 1.0), ModelError);
  EXPECT_THROW(build_two_state_ctmc(1.0, -2.0), ModelError);
}

TEST(CtmcModel, ValidatesGenerator) {
  Eigen::MatrixXd bad_sum(2, 2);
  bad_sum << -1, 1.1, 1, -1;
  EXPECT_THROW(CtmcModel({"a", "b"}, bad_sum), ModelError);
  Eigen::MatrixXd negative(2, 2);
  negative << 1, -1, 1, -1;
  EXPECT_THROW(CtmcModel({"a", "b"}, negative), ModelError);
  Eigen::MatrixXd reducible(3, 3);
  reducible << -1, 1, 0, 1, -1, 0, 1, 0, -1;
  EXPECT_THROW(CtmcModel({"a", "b", "c"}, reducible), ModelError);
  EXPECT_THROW(CtmcModel({"a"}, Eigen::MatrixXd::Zero(1, 1)), ModelError);
}

TEST(SpinFlip, SingleSiteIsTwoStateChain) {
  SpinFlipSpec spec{{{0}}, constant_flip_rate(2.5), {3.0}};
  const auto m = compile_spinflip(spec);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.generator()(0, 1), 2.5);
  EXPECT_DOUBLE_EQ(m.generator()(1, 0), 2.5);
  expect_rows_sum_to_zero(m);
}

TEST(SpinFlip, TwoSitesUnitRates) {
  SpinFlipSpec spec{{{0}, {1}}, constant_flip_rate(1.0), {1.0, 1.0}};
  const auto m = compile_spinflip(spec);
  ASSERT_EQ(m.size(), 4u);
  for (Eigen::Index i = 0; i < 4; ++i) {
    int positive = 0;
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (i == j) continue;
      if (m.generator()(i, j) > 0.0) {
        ++positive;
        EXPECT_DOUBLE_EQ(m.generator()(i, j), 1.0);
        // neighbours differ in exactly one spin
        EXPECT_EQ(__builtin_popcount(static_cast<unsigned>(i ^ j)), 1);
      }
    }
    EXPECT_EQ(positive, 2);
  }
  expect_rows_sum_to_zero(m);
}

TEST(SpinFlip, MajorityRuleIsStructurallySymmetric) {
  std::vector<Site> sites{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  SpinFlipSpec spec{sites, majority_flip_rate(sites, 0.5, 2.0), std::vector<double>(4, 2.0)};
  const auto m = compile_spinflip(spec);
  ASSERT_EQ(m.size(), 16u);
  expect_rows_sum_to_zero(m);
  for (Eigen::Index i = 0; i < 16; ++i) {
    for (Eigen::Index j = 0; j < 16; ++j) {
      if (i != j) {
        EXPECT_EQ(m.generator()(i, j) > 0.0, m.generator()(j, i) > 0.0);
      }
    }
  }
}

TEST(SpinFlip, SymmetricConstantRatesGiveUniformMeasure) {
  SpinFlipSpec spec{{{0}, {1}, {2}}, constant_flip_rate(1.3), {2.0, 2.0, 2.0}};
  const auto mu = stationary_measure(compile_spinflip(spec));
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(mu.weights[i], 0.125, 1e-12);
}

TEST(SpinFlip, RejectsOversizeAndCapViolation) {
  std::vector<Site> sites;
  for (int i = 0; i < 13; ++i) sites.push_back({i});
  EXPECT_THROW(compile_spinflip({sites, constant_flip_rate(1.0), std::vector<double>(13, 1.0)}),
               ModelError);
  EXPECT_THROW(compile_spinflip({{{0}, {1}}, constant_flip_rate(2.0), {1.0, 1.0}}), ModelError);
  EXPECT_THROW(compile_spinflip({{{0}, {0}}, constant_flip_rate(1.0), {1.0, 1.0}}), ModelError);
}

TEST(CtmcPath, ZeroHorizon) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  Stream rng(1);
  const auto p = simulate_ctmc_path(m, 1, 0.0, rng);
  ASSERT_EQ(p.times.size(), 1u);
  EXPECT_EQ(p.times[0], 0.0);
  EXPECT_EQ(p.values[0], 1u);
}

TEST(CtmcPath, HoldingTimesAreExponential) {
  const auto m = build_two_state_ctmc(2.0, 2.0);
  Stream rng(2);
  const auto p = simulate_ctmc_path(m, 0, 60000.0, rng);
  ASSERT_EQ(p.times.size(), p.values.size());
  stats::Moments holds;
  for (std::size_t i = 1; i < p.times.size(); ++i) {
    ASSERT_GT(p.times[i], p.times[i - 1]);
    ASSERT_LE(p.times[i], p.horizon);
    holds.add(p.times[i] - p.times[i - 1]);
  }
  ASSERT_GE(holds.count(), 100000u);
  EXPECT_NEAR(holds.mean(), 0.5, 3 * holds.stderr_mean());
}

TEST(CtmcPath, OccupationFractionMatchesStationaryMeasure) {
  const auto m = build_two_state_ctmc(1.0, 3.0);
  Stream rng(3);
  double in_zero = 0.0;
  std::size_t x = 0;
  x = advance_ctmc(m, x, 1e4, rng, [&](std::size_t s, double dt) { in_zero += s == 0 ? dt : 0.0; });
  EXPECT_NEAR(in_zero / 1e4, 0.75, 0.01 * 0.75);
}

TEST(CtmcPath, OccupationFractionsThreeSigma) {
  const auto m = build_two_state_ctmc(2.0, 1.0);
  stats::Moments frac;
  for (std::uint32_t r = 0; r < 400; ++r) {
    Stream rng(4, r);
    double in_zero = 0.0;
    advance_ctmc(m, 0, 500.0, rng, [&](std::size_t s, double dt) { in_zero += s == 0 ? dt : 0.0; });
    frac.add(in_zero / 500.0);
  }
  EXPECT_NEAR(frac.mean(), 1.0 / 3.0, 3 * frac.stderr_mean());
}

TEST(BrownianCycles, LaplaceTransformAtOneHalf) {
  Stream rng(5);
  stats::Moments lap;
  std::size_t above = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double d = sample_bm_cycle_duration(rng);
    ASSERT_GT(d, 0.0);
    lap.add(std::exp(-0.5 * d));
    above += d > 100.0;
  }
  EXPECT_NEAR(lap.mean(), std::exp(-2.0), 0.001);
  const double p = static_cast<double>(above) / n;
  // stable-1/2 tail constant 2 sqrt(2) / (sqrt(pi) x^{1/2})
  EXPECT_NEAR(p, 2.0 * std::sqrt(2.0) / (std::sqrt(M_PI) * 10.0), 0.1 * 0.1596);
  // exact tail of the Levy(4) law: erf(sqrt(2 / x))
  EXPECT_NEAR(p, boost::math::erf(std::sqrt(2.0 / 100.0)), 4 * std::sqrt(p * (1 - p) / n));
}

TEST(BrownianCycles, SampleMeanGrowsWithoutBound) {
  std::vector<double> medians;
  for (int n : {100, 1000, 10000, 100000}) {
    std::vector<double> means;
    for (std::uint32_t g = 0; g < 21; ++g) {
      Stream rng(6, static_cast<std::uint32_t>(n) + g);
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += sample_bm_cycle_duration(rng);
      means.push_back(s / n);
    }
    std::nth_element(means.begin(), means.begin() + 10, means.end());
    medians.push_back(means[10]);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) EXPECT_GT(medians[i], medians[i - 1]);
  EXPECT_GT(medians.back(), 100.0 * medians.front());
}

TEST(DiffusionCycles, ZeroObservableGivesZeroIntegrals) {
  const auto bm = make_brownian(1.0, 0.0, 1.0, 1e-3);
  const std::vector<LineObservable> obs{LineObservable::zero("zero")};
  Stream rng(7);
  const auto run = simulate_diffusion_cycles(bm, 200, obs, rng);
  ASSERT_EQ(run.cycles.size(), 200u);
  for (const auto& c : run.cycles) {
    EXPECT_GT(c.duration, 0.0);
    EXPECT_EQ(c.xi[0], 0.0);
  }
}

TEST(DiffusionCycles, BrownianLaplaceTransformOnEulerGrid) {
  const auto bm = make_brownian(1.0, 0.0, 1.0, 1e-4);
  Stream rng(8);
  const auto run = simulate_diffusion_cycles(bm, 100000, {}, rng);
  stats::Moments lap;
  for (const auto& c : run.cycles) lap.add(std::exp(-0.5 * c.duration));
  EXPECT_NEAR(lap.mean(), std::exp(-2.0), 0.02 * std::exp(-2.0));
}

// Exact mean cycle length of dX = -X dt + dW between levels 0 and 1:
// int_0^1 s(y) dy * int_R m(z) dz with scale density e^{y^2} and speed density 2 e^{-z^2}.
double ou_exact_mean_cycle() {
  const int n = 20000;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double y = (k + 0.5) / n;
    acc += std::exp(y * y);
  }
  return 2.0 * std::sqrt(M_PI) * acc / n;
}

TEST(DiffusionCycles, OrnsteinUhlenbeckMeanCycleMatchesExactMean) {
  auto ou = make_ornstein_uhlenbeck(1.0, 1.0, 0.0, 1.0, 1e-3);
  ou.crossing = CrossingRule::kBrownianBridge;
  Stream rng(9);
  const auto run = simulate_diffusion_cycles(ou, 60000, {}, rng);
  stats::Moments d;
  for (const auto& c : run.cycles) d.add(c.duration);
  EXPECT_NEAR(d.mean(), ou_exact_mean_cycle(), 0.01 * ou_exact_mean_cycle());
}

TEST(DiffusionCycles, SignChangeBiasFollowsOvershootLaw) {
  // discrete monitoring shifts each level outward by 0.5826 sigma sqrt(dt);
  // d/d(eps) of the mean cycle length at eps = 0 is e * 2 int_{-inf}^1 e^{-z^2} dz + sqrt(pi)
  const double dt = 1e-2;
  const double eps = 0.5826 * std::sqrt(dt);
  const double slope = std::exp(1.0) * std::sqrt(M_PI) * (1.0 + std::erf(1.0)) + std::sqrt(M_PI);
  const double predicted = ou_exact_mean_cycle() + slope * eps;
  const auto ou = make_ornstein_uhlenbeck(1.0, 1.0, 0.0, 1.0, dt);
  Stream rng(10);
  const auto run = simulate_diffusion_cycles(ou, 40000, {}, rng);
  stats::Moments d;
  for (const auto& c : run.cycles) d.add(c.duration);
  EXPECT_GT(d.mean(), ou_exact_mean_cycle() + 5 * d.stderr_mean());
  EXPECT_NEAR(d.mean(), predicted, 0.03 * predicted);
}

TEST(DiffusionCycles, TruncatedCyclesAreCountedAndDiscarded) {
  auto bm = make_brownian(1.0, 0.0, 1.0, 1e-3);
  bm.max_cycle_duration = 5.0;
  Stream rng(11);
  const auto run = simulate_diffusion_cycles(bm, 500, {}, rng);
  EXPECT_GT(run.truncated, 0u);
  for (const auto& c : run.cycles) EXPECT_LE(c.duration, 5.0 + 1e-3);
}

TEST(DiffusionCycles, TrapezoidIntegralBoundedBySupNorm) {
  const auto bm = make_brownian(1.0, 0.0, 1.0, 1e-3);
  const std::vector<LineObservable> obs{
      LineObservable::piecewise("f", {{0.0, 1.0, 1.0}, {1.0, 2.0, -1.0}}, true)};
  EXPECT_NEAR(speed_measure_integral(bm, obs[0]), 0.0, 1e-14);
  Stream rng(12);
  const auto run = simulate_diffusion_cycles(bm, 2000, obs, rng);
  for (const auto& c : run.cycles) EXPECT_LE(std::abs(c.xi[0]), c.duration + 1e-12);
}

TEST(DiffusionModel, Validation) {
  EXPECT_THROW(make_brownian(1.0, 0.0, 0.0), ModelError);
  EXPECT_THROW(make_brownian(1.0, 0.0, 1.0, -1.0), ModelError);
  Stream rng(1);
  EXPECT_THROW(simulate_diffusion_cycles(make_brownian(), 0, {}, rng), DomainError);
}

}  // namespace
