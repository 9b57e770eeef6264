#include <gtest/gtest.h>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "regen/models/ctmc.hpp"
#include "regen/models/spinflip.hpp"
#include "regen/random.hpp"
#include "regen/resolvent.hpp"

namespace {

using namespace regen;

CtmcModel random_model(std::size_t n, std::uint64_t seed) {
  Stream rng(seed);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (i != j) g(i, j) = 3.0 * rng.uniform();
    }
    g(i, i) = -g.row(i).sum();
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
  return CtmcModel(labels, g);
}

// oracle: int_0^inf e^{-t} P_t dt by Simpson's rule in u = log t, with P_t from Eigen's expm
Eigen::MatrixXd resolvent_by_quadrature(const CtmcModel& m) {
  const double u_lo = std::log(1e-12), u_hi = std::log(60.0);
  const int panels = 6000;
  const double h = (u_hi - u_lo) / panels;
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k <= panels; ++k) {
    const double t = std::exp(u_lo + k * h);
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const Eigen::MatrixXd pt = (t * m.generator()).exp();
    acc += w * std::exp(-t) * t * pt;
  }
  // mass on [0, 1e-12] where P_t ~ I
  return acc * h / 3.0 + 1e-12 * Eigen::MatrixXd::Identity(n, n);
}

TEST(TransitionMatrix, IdentityAtZero) {
  const auto m = build_two_state_ctmc(1.0, 2.0);
  EXPECT_TRUE(transition_matrix(m, 0.0).isIdentity(0.0));
}

TEST(TransitionMatrix, TwoStateClosedForm) {
  const auto m = build_two_state_ctmc(1.0, 1.0);
  const auto p = transition_matrix(m, 1.0);
  EXPECT_NEAR(p(0, 0), 0.5 + 0.5 * std::exp(-2.0), 1e-14);
  EXPECT_NEAR(p(0, 0), 0.56767, 1e-5);
  // general two-state: p_t(0,0) = b/(a+b) + a/(a+b) e^{-(a+b)t}
  const auto m2 = build_two_state_ctmc(0.7, 2.9);
  for (double t : {0.01, 0.5, 3.0, 40.0}) {
    const double expected = 2.9 / 3.6 + 0.7 / 3.6 * std::exp(-3.6 * t);
    EXPECT_NEAR(transition_matrix(m2, t)(0, 0), expected, 1e-12 * expected);
  }
}

TEST(TransitionMatrix, RowsAreStochastic) {
  const auto m = random_model(6, 1);
  for (double t : {1e-3, 0.3, 2.0, 25.0, 1000.0}) {
    const auto p = transition_matrix(m, t);
    for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-10);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(TransitionMatrix, NegativeTimeIsDomainError) {
  EXPECT_THROW(transition_matrix(build_two_state_ctmc(1, 1), -0.1), DomainError);
}

TEST(TransitionMatrix, MatchesEigenMatrixExponential) {
  const auto m = random_model(7, 2);
  for (double t : {0.05, 1.0, 7.5}) {
    const Eigen::MatrixXd oracle = (t * m.generator()).exp();
    EXPECT_LT((transition_matrix(m, t) - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TransitionMatrix, SemigroupProperty) {
  const auto m = random_model(5, 3);
  Stream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double s = 5.0 * rng.uniform(), t = 5.0 * rng.uniform();
    const Eigen::MatrixXd lhs = transition_matrix(m, s) * transition_matrix(m, t);
    EXPECT_LT((lhs - transition_matrix(m, s + t)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Resolvent, TwoStateClosedForm) {
  const auto k = resolvent_kernel(build_two_state_ctmc(1.0, 1.0));
  Eigen::Matrix2d expected;
  expected << 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0;
  EXPECT_LT((k.u1 - expected).cwiseAbs().maxCoeff(), 1e-15);
  const auto k2 = resolvent_kernel(build_two_state_ctmc(1.0, 3.0));
  EXPECT_NEAR(k2(0, 0), 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(k2.u1.row(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(k2.u1.row(1).sum(), 1.0, 1e-15);
}

TEST(Resolvent, StrictlyPositiveForIrreducibleModels) {
  SpinFlipSpec spec{{{0}, {1}, {2}}, constant_flip_rate(1.0), {1.0, 1.0, 1.0}};
  const auto k = resolvent_kernel(compile_spinflip(spec));
  EXPECT_GT(k.u1.minCoeff(), 0.0);
  for (Eigen::Index i = 0; i < k.u1.rows(); ++i) EXPECT_NEAR(k.u1.row(i).sum(), 1.0, 1e-10);
}

TEST(Resolvent, MatchesQuadratureOracle) {
  for (const auto& m : {build_two_state_ctmc(1.0, 3.0), random_model(4, 5)}) {
    const auto k = resolvent_kernel(m);
    EXPECT_LT((k.u1 - resolvent_by_quadrature(m)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Stationary, InvariantUnderSemigroupAndResolvent) {
  const auto m = random_model(6, 6);
  const auto mu = stationary_measure(m);
  EXPECT_NEAR(mu.total(), 1.0, 1e-14);
  for (double t : {0.1, 1.0, 10.0}) {
    const Eigen::RowVectorXd moved = mu.weights.transpose() * transition_matrix(m, t);
    EXPECT_LT((moved - mu.weights.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
  const Eigen::RowVectorXd through_u1 = mu.weights.transpose() * resolvent_kernel(m).u1;
  EXPECT_LT((through_u1 - mu.weights.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((mu.weights.transpose() * m.generator()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Stationary, CycleNormalizationScalesMass) {
  const auto mu = stationary_measure(build_two_state_ctmc(1.0, 3.0));
  const auto cyc = mu.rescaled(2.5, Normalization::kCycle);
  EXPECT_NEAR(cyc.total(), 2.5, 1e-14);
  EXPECT_NEAR(cyc[0] / cyc[1], 3.0, 1e-12);
}

}  // namespace
