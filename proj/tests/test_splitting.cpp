#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "regen/models/ctmc.hpp"
#include "regen/models/spinflip.hpp"
#include "regen/resolvent.hpp"
#include "regen/splitting.hpp"
#include "regen/stats.hpp"

namespace {

using namespace regen;

CtmcModel four_state() {
  Eigen::MatrixXd g(4, 4);
  g << -1.5, 1.0, 0.5, 0.0,
       0.3, -0.9, 0.2, 0.4,
       0.0, 2.0, -2.5, 0.5,
       1.0, 0.0, 0.7, -1.7;
  return CtmcModel({"a", "b", "c", "d"}, g);
}

TEST(Minorization, TwoStateFullSmallSet) {
  const auto k = resolvent_kernel(build_two_state_ctmc(1.0, 1.0));
  const auto cert = compute_minorization(k, {0, 1});
  EXPECT_NEAR(cert.alpha, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(cert.nu[0], 0.5, 1e-12);
  EXPECT_NEAR(cert.nu[1], 0.5, 1e-12);
  EXPECT_GE(certificate_slack(cert, k), -1e-14);
}

TEST(Minorization, SingleStateSmallSet) {
  const auto k = resolvent_kernel(four_state());
  const auto cert = compute_minorization(k, {2});
  EXPECT_DOUBLE_EQ(cert.alpha, k(2, 2));
  EXPECT_DOUBLE_EQ(cert.nu[2], 1.0);
  EXPECT_EQ(cert.nu.sum(), 1.0);
}

TEST(Minorization, ExhaustiveInequalityOnLargerModel) {
  std::vector<Site> sites{{0}, {1}, {2}, {3}};
  SpinFlipSpec spec{sites, majority_flip_rate(sites, 0.3, 1.2), std::vector<double>(4, 1.2)};
  const auto k = resolvent_kernel(compile_spinflip(spec));
  const auto cert = compute_minorization(k, {0, 5, 10, 15});
  for (std::size_t x : cert.small_set) {
    for (std::size_t y = 0; y < k.states; ++y) {
      EXPECT_GE(k(x, y) - cert.alpha * cert.nu[static_cast<Eigen::Index>(y)], -1e-14);
    }
  }
}

TEST(Minorization, RejectsEmptyOrBadSets) {
  const auto k = resolvent_kernel(four_state());
  EXPECT_THROW(compute_minorization(k, {}), CertificateError);
  EXPECT_THROW(compute_minorization(k, {1, 1}), CertificateError);
  EXPECT_THROW(compute_minorization(k, {7}), CertificateError);
}

TEST(KernelQ, Branches) {
  const auto k = resolvent_kernel(four_state());
  const auto cert = compute_minorization(k, {0, 1});
  EXPECT_EQ(kernel_q(cert, k, 0, 0.0), cert.nu);
  EXPECT_EQ(kernel_q(cert, k, 2, 0.0), Eigen::VectorXd(k.u1.row(2).transpose()));
  EXPECT_EQ(kernel_q(cert, k, 3, 0.9), Eigen::VectorXd(k.u1.row(3).transpose()));
  for (std::size_t x : {0u, 1u}) {
    const Eigen::VectorXd mixed =
        cert.alpha * cert.nu + (1.0 - cert.alpha) * kernel_q(cert, k, x, 0.999);
    EXPECT_LT((mixed - k.u1.row(static_cast<Eigen::Index>(x)).transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(kernel_q(cert, k, 0, 1.5), DomainError);
}

TEST(KernelQ, RowsAreProbabilityVectors) {
  const auto k = resolvent_kernel(four_state());
  const auto cert = compute_minorization(k, {1, 2, 3});
  Stream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double z2 = rng.uniform();
    for (std::size_t x = 0; x < 4; ++x) {
      const auto q = kernel_q(cert, k, x, z2);
      EXPECT_NEAR(q.sum(), 1.0, 1e-12);
      EXPECT_GE(q.minCoeff(), 0.0);
    }
  }
}

// oracle for the jump-time law: Simpson quadrature of e^{-t} p_t(x, x3) with Eigen's expm
double jump_time_moment(const CtmcModel& m, std::size_t x, std::size_t x3, int power, double upper) {
  const int panels = 20000;
  const double h = upper / panels;
  double acc = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = i * h;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const Eigen::MatrixXd pt = (t * m.generator()).exp();
    const double p = pt(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x3));
    acc += w * std::pow(t, power) * std::exp(-t) * p;
  }
  return acc * h / 3.0;
}

TEST(JumpTime, NearlyFrozenChainGivesUnitExponential) {
  const auto m = build_two_state_ctmc(1e-6, 1e-6);
  const auto k = resolvent_kernel(m);
  JumpTimeSampler sampler(m, k);
  Stream rng(2);
  stats::Moments s;
  for (int i = 0; i < 100000; ++i) s.add(sampler.sample(0, 0, rng));
  EXPECT_NEAR(s.mean(), 1.0, 3 * s.stderr_mean());
}

TEST(JumpTime, MeanMatchesQuadratureOracle) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  const auto k = resolvent_kernel(m);
  JumpTimeSampler sampler(m, k);
  Stream rng(3);
  stats::Moments s;
  for (int i = 0; i < 100000; ++i) {
    const double t = sampler.sample(0, 1, rng);
    ASSERT_GT(t, 0.0);
    ASSERT_TRUE(std::isfinite(t));
    s.add(t);
  }
  const double oracle = jump_time_moment(m, 0, 1, 1, 60.0) / k(0, 1);
  EXPECT_NEAR(oracle, 4.0 / 3.0, 1e-8);
  EXPECT_NEAR(s.mean(), oracle, 0.01 * oracle);
}

TEST(JumpTime, TabulatedCdfMatchesQuadrature) {
  const auto m = four_state();
  const auto k = resolvent_kernel(m);
  JumpTimeSampler sampler(m, k);
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t x3 = 0; x3 < 4; ++x3) {
      for (double t : {0.05, 0.7, 3.3}) {
        const double oracle = jump_time_moment(m, x, x3, 0, t) / k(x, x3);
        EXPECT_NEAR(sampler.cdf(x, x3, t), oracle, 1e-8 * std::max(oracle, 1e-3));
      }
    }
  }
}

TEST(JumpTime, KsAgainstTabulatedLaw) {
  const auto m = four_state();
  const auto k = resolvent_kernel(m);
  JumpTimeSampler sampler(m, k);
  Stream rng(4);
  std::vector<double> u;
  for (int i = 0; i < 20000; ++i) u.push_back(sampler.cdf(3, 1, sampler.sample(3, 1, rng)));
  EXPECT_GT(stats::ks_uniform(u).p_value, 0.01);
}

TEST(Bridge, EndpointContinuity) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  Stream rng(5);
  int at_start = 0, at_end = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    at_start += sample_bridge_state(m, 0, 1, 2.0, 2e-6, rng) == 0;
    at_end += sample_bridge_state(m, 0, 1, 2.0, 2.0 - 2e-6, rng) == 1;
  }
  EXPECT_GT(at_start, 0.999 * n);
  EXPECT_GT(at_end, 0.999 * n);
}

TEST(Bridge, MidpointLawMatchesClosedForm) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  Stream rng(6);
  const int n = 100000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += sample_bridge_state(m, 0, 0, 2.0, 1.0, rng) == 0;
  const double p1 = 0.5 + 0.5 * std::exp(-2.0), p2 = 0.5 + 0.5 * std::exp(-4.0);
  const double expected = p1 * p1 / p2;
  EXPECT_NEAR(static_cast<double>(zeros) / n, expected, 3 * std::sqrt(expected * (1 - expected) / n));
}

TEST(Bridge, RejectsBadTimes) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  Stream rng(7);
  EXPECT_THROW(sample_bridge_state(m, 0, 1, 1.0, 0.0, rng), DomainError);
  EXPECT_THROW(sample_bridge_state(m, 0, 1, 1.0, 1.0, rng), DomainError);
}

class TwoStateSplit : public ::testing::Test {
 protected:
  CtmcModel model = build_two_state_ctmc(1.0, 1.0);
  SplitChain chain{model, std::vector<std::size_t>{0, 1}};
};

TEST_F(TwoStateSplit, RetrospectiveCycleStructure) {
  Stream rng(8);
  const std::vector<StateObservable> obs{StateObservable::indicator("zero", 2, {0})};
  const auto s = chain.retrospective(0, 100001, obs, rng);
  ASSERT_EQ(s.records.size(), 100000u);
  stats::Moments ticks, dur, xi;
  std::size_t start_zero = 0;
  for (const auto& r : s.records) {
    ASSERT_GT(r.duration, 0.0);
    ASSERT_LE(std::abs(r.xi[0]), r.duration * (1 + 1e-12));
    ticks.add(static_cast<double>(r.clock_ticks));
    dur.add(r.duration);
    xi.add(r.xi[0]);
    start_zero += *r.start_state == 0;
  }
  // one uncoined tick after each regeneration, then geometric(alpha) trials, then the tick to R
  EXPECT_NEAR(ticks.mean(), 1.0 + 1.0 / (2.0 / 3.0), 0.05 * 2.5);
  EXPECT_NEAR(dur.mean(), 2.5, 3 * dur.stderr_mean());
  // cycle-normalized stationary mass of state 0 is m / 2
  EXPECT_NEAR(xi.mean(), 1.25, 3 * xi.stderr_mean());
  const double n = static_cast<double>(s.records.size());
  EXPECT_NEAR(start_zero / n, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST_F(TwoStateSplit, RetrospectiveCyclesLookIndependent) {
  Stream rng(9);
  const std::vector<StateObservable> obs{StateObservable::indicator("zero", 2, {0})};
  const auto s = chain.retrospective(1, 20001, obs, rng);
  const auto d = s.durations();
  const double band = 3.0 / std::sqrt(static_cast<double>(d.size()));
  EXPECT_LT(std::abs(stats::autocorrelation(d, 1)), band);
  EXPECT_LT(std::abs(stats::autocorrelation(d, 2)), band);
  EXPECT_LT(std::abs(stats::autocorrelation(s.xi(0), 2)), band);
  // stationarity across halves
  const auto xi = s.xi(0);
  const std::size_t half = xi.size() / 2;
  stats::Moments a, b;
  for (std::size_t i = 0; i < xi.size(); ++i) (i < half ? a : b).add(xi[i]);
  const double pooled = std::sqrt(a.stderr_mean() * a.stderr_mean() + b.stderr_mean() * b.stderr_mean());
  EXPECT_LT(std::abs(a.mean() - b.mean()), 3 * pooled);
}

TEST_F(TwoStateSplit, ForwardMatchesRetrospective) {
  Stream rng_f(10), rng_r(11);
  const auto fwd = chain.forward(chain.initial_state(0, rng_f), 10001, {}, rng_f,
                                 {.bridge_points = 32, .keep_clock_times = true, .keep_coins = true});
  const auto ret = chain.retrospective(0, 10001, {}, rng_r);
  stats::Moments a, b;
  for (double d : fwd.durations()) {
    ASSERT_GT(d, 0.0);
    a.add(d);
  }
  for (double d : ret.durations()) b.add(d);
  const double pooled = std::sqrt(a.stderr_mean() * a.stderr_mean() + b.stderr_mean() * b.stderr_mean());
  EXPECT_LT(std::abs(a.mean() - b.mean()), 3 * pooled);
  EXPECT_GT(stats::ks_two_sample(fwd.durations(), ret.durations()).p_value, 0.01);
  ASSERT_GE(fwd.coins.size(), 10000u);
  EXPECT_GT(stats::ks_uniform(fwd.coins).p_value, 0.01);
  for (std::size_t i = 1; i < fwd.clock_times.size(); ++i) {
    ASSERT_GT(fwd.clock_times[i], fwd.clock_times[i - 1]);
  }
}

TEST_F(TwoStateSplit, ForwardObservableIntegralsAgreeWithRetrospective) {
  const std::vector<StateObservable> obs{StateObservable::indicator("zero", 2, {0})};
  Stream rng_f(12), rng_r(13);
  const auto fwd = chain.forward(chain.initial_state(0, rng_f), 10001, obs, rng_f);
  const auto ret = chain.retrospective(0, 10001, obs, rng_r);
  const auto a = stats::mean_estimate(fwd.xi(0));
  const auto b = stats::mean_estimate(ret.xi(0));
  EXPECT_LT(std::abs(a.value - b.value), 3 * std::hypot(a.stderr_, b.stderr_));
}

TEST(SplitChain, RejectsUnsoundCertificate) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  auto cert = compute_minorization(resolvent_kernel(m), {0, 1});
  cert.alpha = 0.9;
  EXPECT_THROW(SplitChain(m, cert), CertificateError);
}

TEST(SplitChain, FourStateSmallSetAgreement) {
  const auto m = four_state();
  SplitChain chain(m, std::vector<std::size_t>{1, 2});
  Stream rng_f(14), rng_r(15);
  const auto fwd = chain.forward(chain.initial_state(1, rng_f), 5001, {}, rng_f);
  const auto ret = chain.retrospective(1, 5001, {}, rng_r);
  EXPECT_GT(stats::ks_two_sample(fwd.durations(), ret.durations()).p_value, 0.01);
  // cycles start in the small set with law nu
  std::vector<double> counts(4, 0.0);
  for (const auto& r : ret.records) counts[*r.start_state] += 1.0;
  EXPECT_EQ(counts[0] + counts[3], 0.0);
  const std::vector<double> cells{counts[1], counts[2]};
  const std::vector<double> probs{chain.cert().nu[1], chain.cert().nu[2]};
  EXPECT_GT(stats::chi_square_gof(cells, probs).p_value, 0.01);
}

}  // namespace
