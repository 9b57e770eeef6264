#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "regen/models/ctmc.hpp"
#include "regen/models/diffusion.hpp"
#include "regen/models/spinflip.hpp"
#include "regen/regeneration.hpp"
#include "regen/resolvent.hpp"
#include "regen/splitting.hpp"

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

RegenerationStream synthetic_stream(const std::vector<double>& durations) {
  std::vector<RegenerationRecord> cycles;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    RegenerationRecord r;
    r.index = i + 1;
    r.duration = durations[i];
    r.xi = {durations[i]};
    cycles.push_back(r);
  }
  return make_stream(std::move(cycles), {"one"});
}

TEST(EstimateCf, ZeroObservableGivesZero) {
  const auto model = build_two_state_ctmc(1.0, 1.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  const auto est = estimate_cf(chain, StateObservable::constant("zero", 2, 0.0), 50, 1);
  EXPECT_EQ(est.value, 0.0);
}

TEST(EstimateCf, TwoStateIndicatorIsStableUnderDoubling) {
  const auto model = build_two_state_ctmc(1.0, 1.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  const auto f = StateObservable::indicator("s0", 2, {0});
  const auto small = estimate_cf(chain, f, 4000, 11);
  const auto large = estimate_cf(chain, f, 8000, 12);
  for (const auto& e : small.per_start) {
    EXPECT_GT(e.value, 0.0);
    EXPECT_TRUE(std::isfinite(e.value));
  }
  // starting in state 0 accumulates more time there before R_1
  EXPECT_GT(small.per_start[0].value, small.per_start[1].value);
  EXPECT_EQ(small.argmax, 0u);
  const auto& a = small.per_start[small.argmax];
  const auto& b = large.per_start[large.argmax];
  EXPECT_LT(std::abs(a.value - b.value), 2.0 * std::hypot(a.stderr_, b.stderr_));
}

TEST(EstimateCf, ScalesLinearlyInAbsoluteValue) {
  const auto model = four_state();
  const SplitChain chain(model, std::vector<std::size_t>{1, 2});
  StateObservable f{"f", Eigen::Vector4d(0.5, -1.0, 0.25, 0.0), false};
  const auto one = estimate_cf(chain, f, 500, 3);
  const auto two = estimate_cf(chain, f.scaled(2.0), 500, 3);
  for (std::size_t x = 0; x < 4; ++x) {
    EXPECT_NEAR(two.per_start[x].value, 2.0 * one.per_start[x].value, 1e-12 * two.per_start[x].value);
  }
  EXPECT_NEAR(two.value, 2.0 * one.value, 1e-12 * two.value);
}

TEST(EstimateCf, DiffusionGridSpansSupportAndLevels) {
  const auto bm = make_brownian(1.0, 0.0, 1.0, 1e-3);
  const auto f = LineObservable::piecewise("f", {{-0.5, 0.0, 1.0}, {1.0, 2.0, -1.0}});
  const auto grid = diffusion_start_grid(bm, f);
  ASSERT_EQ(grid.size(), 21u);
  EXPECT_DOUBLE_EQ(grid.front(), -0.5);
  EXPECT_DOUBLE_EQ(grid.back(), 2.0);
  const std::vector<double> starts{0.0, 1.0};
  const auto est = estimate_cf(bm, f, starts, 200, 5);
  EXPECT_GT(est.value, 0.0);
  EXPECT_EQ(est.per_start.size(), 2u);
}

TEST(Constants, DefinitionArithmetic) {
  auto [k1, b1] = k_and_b(1.0, 0.5);
  EXPECT_DOUBLE_EQ(k1, 1.5);
  EXPECT_DOUBLE_EQ(b1, 2.25);
  auto [k2, b2] = k_and_b(0.3, 0.2);
  EXPECT_DOUBLE_EQ(k2, 0.5);
  EXPECT_DOUBLE_EQ(b2, 0.5);
}

TEST(Constants, RejectsTooFewCycles) {
  const auto s = synthetic_stream(std::vector<double>(100, 1.0));  // 99 stationary cycles
  EXPECT_THROW(constants_from_cycles(s, 1.0, {0.5, 0.0}), DataError);
  const auto ok = constants_from_cycles(synthetic_stream(std::vector<double>(101, 2.0)), 1.0, {0.5, 0.0});
  EXPECT_DOUBLE_EQ(ok.k_f, 1.5);
  EXPECT_DOUBLE_EQ(ok.m_hat.value, 2.0);
}

TEST(Constants, TwoStateMeanCycleLength) {
  const auto model = build_two_state_ctmc(1.0, 1.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  Stream rng(21);
  const std::vector<StateObservable> obs{StateObservable::indicator("s0", 2, {0})};
  const auto stream = chain.retrospective(0, 20001, obs, rng);
  const auto c = constants_from_cycles(stream, 1.0, {0.0, 0.0});
  // strict regeneration convention: m = 1 + 1/alpha = 2.5
  EXPECT_NEAR(c.m_hat.value, 2.5, 0.05 * 2.5);
}

TEST(EmpiricalLaplace, ZeroRateIsExactlyOne) {
  const std::vector<double> d{0.5, 1.0, 7.0};
  EXPECT_EQ(empirical_laplace(d, 0.0).value, 1.0);
  EXPECT_THROW(empirical_laplace(d, -1.0), DomainError);
}

TEST(EmpiricalLaplace, BrownianCyclesMatchClosedForm) {
  Stream rng(2024);
  std::vector<double> d(1000000);
  for (auto& x : d) x = sample_bm_cycle_duration(rng);
  const auto e = empirical_laplace(d, 0.5);
  EXPECT_NEAR(e.value, std::exp(-2.0), 3.0 * e.stderr_);
  double prev = 1.0;
  for (double l : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double v = empirical_laplace(d, l).value;
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(CountRegenerations, ShortTimesGiveZero) {
  const std::vector<std::vector<double>> d{{2.0, 1.0, 5.0}, {3.0, 4.0}};
  const std::vector<double> t{0.5, 1.9, 2.0, 5.0};
  const auto table = count_regenerations(d, t);
  EXPECT_EQ(table.n_t[0][0], 0.0);
  EXPECT_EQ(table.n_t[0][1], 0.0);
  EXPECT_DOUBLE_EQ(table.vstar[0].value, 1.0);
  EXPECT_EQ(table.n_t[2][0], 1.0);  // R_1 = 2 <= 2
  EXPECT_EQ(table.n_t[3][0], 2.0);
  EXPECT_EQ(table.n_t[3][1], 1.0);
}

TEST(CountRegenerations, ShortfallNamesReplication) {
  const std::vector<std::vector<double>> d{{2.0, 10.0}, {1.0, 1.0}};
  const std::vector<double> t{5.0};
  try {
    count_regenerations(d, t);
    FAIL() << "expected a shortfall error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("replication 1"), std::string::npos);
  }
}

TEST(CountRegenerations, TwoStateRenewalRate) {
  const auto model = build_two_state_ctmc(1.0, 1.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  const std::vector<double> t{10.0, 100.0, 1000.0};
  std::vector<std::vector<double>> d(1000);
  for (std::size_t r = 0; r < d.size(); ++r) {
    auto rng = replication_stream(77, r, StreamTag::kCounting);
    const std::size_t x0 = sample_categorical(chain.cert().nu, rng);
    for (const auto& c : chain.retrospective_until(x0, t.back(), {}, rng)) d[r].push_back(c.duration);
  }
  const auto table = count_regenerations(d, t);
  EXPECT_NEAR(table.vstar[2].value / 1000.0, 1.0 / 2.5, 0.05 / 2.5);
  for (std::size_t k = 1; k < t.size(); ++k) EXPECT_GE(table.vstar[k].value, table.vstar[k - 1].value);
}

TEST(CountRegenerations, BrownianSquareRootScaling) {
  const std::vector<double> t{1e3, 1e4, 1e5};
  std::vector<std::vector<double>> d(10000);
  for (std::size_t r = 0; r < d.size(); ++r) {
    auto rng = replication_stream(5, r, StreamTag::kCounting);
    double total = 0.0;
    while (total <= t.back()) {
      d[r].push_back(sample_bm_cycle_duration(rng));
      total += d[r].back();
    }
  }
  const auto table = count_regenerations(d, t);
  const double r0 = table.vstar[0].value / std::sqrt(t[0]);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double rk = table.vstar[k].value / std::sqrt(t[k]);
    EXPECT_LT(std::abs(rk / r0 - 1.0), 0.10);
    EXPECT_GE(table.vstar[k].value, table.vstar[k - 1].value);
  }
}

TEST(KacRatio, IdenticalObservablesGiveOne) {
  std::vector<double> d;
  for (int i = 0; i < 200; ++i) d.push_back(1.0 + 0.01 * i);
  const auto s = synthetic_stream(d);
  const auto r = kac_ratio(s, 0, 0);
  EXPECT_EQ(r.ratio, 1.0);
}

TEST(KacRatio, ZeroDenominatorIsAnError) {
  const auto model = build_two_state_ctmc(1.0, 1.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  Stream rng(3);
  const std::vector<StateObservable> obs{StateObservable::indicator("s0", 2, {0}),
                                         StateObservable::constant("zero", 2, 0.0)};
  const auto s = chain.retrospective(0, 100, obs, rng);
  EXPECT_THROW(kac_ratio(s, 0, 1), DataError);
}

TEST(KacRatio, TwoStateOccupationRatio) {
  const auto model = build_two_state_ctmc(1.0, 3.0);
  const SplitChain chain(model, std::vector<std::size_t>{0, 1});
  Stream rng(8);
  const std::vector<StateObservable> obs{StateObservable::indicator("s0", 2, {0}),
                                         StateObservable::indicator("s1", 2, {1})};
  const auto s = chain.retrospective(0, 100001, obs, rng);
  const auto r = kac_ratio(s, 0, 1);
  EXPECT_LE(r.ci_low, 3.0);
  EXPECT_GE(r.ci_high, 3.0);
  EXPECT_LT(r.ci_high - r.ci_low, 0.2);
}

TEST(KacRatio, SymmetricSpinFlipPair) {
  SpinFlipSpec spec;
  spec.sites = {{0}, {1}};
  spec.rate = majority_flip_rate(spec.sites, 0.5, 2.0);
  spec.rate_caps = {2.0, 2.0};
  const auto model = compile_spinflip(spec);
  std::vector<std::size_t> all(model.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const SplitChain chain(model, all);
  Stream rng(13);
  const std::vector<StateObservable> obs{
      StateObservable::indicator("plus", model.size(), {model.index_of("++")}),
      StateObservable::indicator("minus", model.size(), {model.index_of("--")})};
  const auto s = chain.retrospective(0, 50001, obs, rng);
  const auto r = kac_ratio(s, 0, 1);
  EXPECT_LE(r.ci_low, 1.0);
  EXPECT_GE(r.ci_high, 1.0);
}

TEST(KacRatio, MatchesExactStationaryMeasure) {
  const auto model = four_state();
  const auto pi = stationary_measure(model);
  const SplitChain chain(model, std::vector<std::size_t>{1, 2});
  Stream rng(99);
  const std::vector<StateObservable> obs{
      StateObservable::indicator("a", 4, {0}), StateObservable::indicator("b", 4, {1}),
      StateObservable{"w", Eigen::Vector4d(1.0, 0.5, 2.0, 0.25), false},
      StateObservable::indicator("cd", 4, {2, 3})};
  const auto s = chain.retrospective(0, 60001, obs, rng);
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 3}, {3, 0}};
  for (auto [i, j] : pairs) {
    const double exact = pi.weights.dot(obs[i].values) / pi.weights.dot(obs[j].values);
    const auto r = kac_ratio(s, i, j);
    EXPECT_LE(r.ci_low, exact) << obs[i].name << "/" << obs[j].name;
    EXPECT_GE(r.ci_high, exact) << obs[i].name << "/" << obs[j].name;
  }
}

TEST(CycleInvariants, IncrementsBoundedAndCenteredMeanVanishes) {
  const auto model = four_state();
  const auto pi = stationary_measure(model);
  const SplitChain chain(model, std::vector<std::size_t>{1, 2});
  const StateObservable raw{"w", Eigen::Vector4d(1.0, -0.5, 2.0, 0.25), false};
  const auto f = centered_observable(raw, pi.weights);
  Stream rng(4);
  const std::vector<StateObservable> obs{f};
  const auto s = chain.retrospective(0, 40001, obs, rng);
  for (const auto& r : s.records) {
    EXPECT_GT(r.duration, 0.0);
    ASSERT_LE(std::abs(r.xi[0]), f.sup_norm() * r.duration * (1.0 + 1e-12));
  }
  const auto e = stats::mean_estimate(s.xi(0));
  EXPECT_LT(std::abs(e.value), 3.0 * e.stderr_);
}

}  // namespace
