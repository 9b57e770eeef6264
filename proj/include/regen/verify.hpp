#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regen/cycles.hpp"
#include "regen/error.hpp"
#include "regen/montecarlo.hpp"
#include "regen/regeneration.hpp"
#include "regen/stats.hpp"

namespace regen {

enum class CheckStatus { kPass, kFail, kVacuous };

inline std::string status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kVacuous: return "vacuous";
  }
  return "unknown";
}

struct CheckReport {
  std::string check_name;
  CheckStatus status = CheckStatus::kVacuous;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string details;
};

/// Statistical thresholds shared by every check; recorded in reports.
struct VerifyThresholds {
  double sigmas = 3.0;
  double p_value = 0.01;
  double hill_tolerance = 0.05;
  double light_tail_index = 2.0;
  double confidence = 0.99;
};

inline constexpr std::size_t kMinMomentCycles = 100000;
inline constexpr std::size_t kMinCountSamples = 10000;
inline constexpr std::size_t kMinDependenceCycles = 10000;
inline constexpr std::size_t kMinTailIndexSamples = 1000000;

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

inline double factorial(int p) {
  double f = 1.0;
  for (int k = 2; k <= p; ++k) f *= k;
  return f;
}

/// Compares the p-th absolute sample moment, less `sigmas` standard errors,
/// with `limit`.
inline CheckReport moment_check(std::string name, std::span<const double> xs, int p, double limit,
                                double sigmas) {
  stats::Moments m;
  for (double x : xs) m.add(std::pow(std::abs(x), p));
  CheckReport r;
  r.check_name = std::move(name);
  r.statistic = m.mean() - sigmas * m.stderr_mean();
  r.threshold = limit;
  r.status = r.statistic <= r.threshold ? CheckStatus::kPass : CheckStatus::kFail;
  r.details = "mean |.|^" + std::to_string(p) + " = " + fmt(m.mean()) + " (se " + fmt(m.stderr_mean()) +
              "); mean - " + fmt(sigmas) + " se = " + fmt(r.statistic) + " <= " + fmt(limit) + " required";
  return r;
}

}  // namespace detail

/// E|xi|^p <= p! K(f)^p for p = 1..p_max.
inline std::vector<CheckReport> check_xi_moments(std::span<const double> xi, double k_f, int p_max,
                                                 const VerifyThresholds& th = {}) {
  if (p_max < 1 || p_max > 4) throw DomainError("check_xi_moments: p_max must lie in [1, 4]");
  if (xi.size() < kMinMomentCycles) {
    throw DataError("check_xi_moments: need at least " + std::to_string(kMinMomentCycles) + " cycles");
  }
  std::vector<CheckReport> out;
  for (int p = 1; p <= p_max; ++p) {
    out.push_back(detail::moment_check("xi_moment_p" + std::to_string(p), xi, p,
                                       detail::factorial(p) * std::pow(k_f, p), th.sigmas));
  }
  return out;
}

/// E N_t^p <= p! (v*_t)^p and the tail P(N_t > (v*_t)^{1+delta} (x v 1)) <=
/// 2 exp(-(v*_t)^delta (x v 1) / 2), compared through the lower end of the
/// exact binomial interval.
inline std::vector<CheckReport> check_nt_moments(const CountTable& counts, int p_max,
                                                 const VerifyThresholds& th = {},
                                                 double delta = 0.5,
                                                 const std::vector<double>& x_levels = {1.0, 2.0}) {
  if (p_max < 1 || p_max > 4) throw DomainError("check_nt_moments: p_max must lie in [1, 4]");
  std::vector<CheckReport> out;
  for (std::size_t k = 0; k < counts.t_grid.size(); ++k) {
    const auto& n = counts.n_t[k];
    if (n.size() < kMinCountSamples) {
      throw DataError("check_nt_moments: need at least " + std::to_string(kMinCountSamples) + " samples of N_t");
    }
    const double t = counts.t_grid[k];
    const double vs = counts.vstar[k].value;
    const std::string tag = "_t" + detail::fmt(t);
    for (int p = 1; p <= p_max; ++p) {
      out.push_back(detail::moment_check("nt_moment_p" + std::to_string(p) + tag, n, p,
                                         detail::factorial(p) * std::pow(vs, p), th.sigmas));
    }
    for (double x : x_levels) {
      const double xv = std::max(x, 1.0);
      const double level = std::pow(vs, 1.0 + delta) * xv;
      const double bound = 2.0 * std::exp(-0.5 * std::pow(vs, delta) * xv);
      std::size_t hits = 0;
      for (double v : n) {
        if (v > level) ++hits;
      }
      const auto ci = stats::clopper_pearson(hits, n.size(), th.confidence);
      CheckReport r;
      r.check_name = "nt_tail_x" + detail::fmt(x) + tag;
      r.statistic = ci.low;
      r.threshold = bound;
      if (bound >= 1.0) {
        r.status = CheckStatus::kVacuous;
      } else {
        r.status = ci.low <= bound ? CheckStatus::kPass : CheckStatus::kFail;
      }
      r.details = "P(N_t > " + detail::fmt(level) + ") = " + detail::fmt(static_cast<double>(hits) / n.size()) +
                  " [" + detail::fmt(ci.low) + ", " + detail::fmt(ci.high) + "] vs bound " + detail::fmt(bound);
      out.push_back(r);
    }
  }
  return out;
}

/// (a) lag-2 autocorrelation of xi within +-3/sqrt(N); (b) KS between the
/// duration halves; (c) start states against nu. Lag-1 correlation is
/// reported without a threshold.
inline std::vector<CheckReport> check_dependence_structure(const RegenerationStream& cycles,
                                                           std::size_t observable,
                                                           const std::optional<Eigen::VectorXd>& nu = std::nullopt,
                                                           const VerifyThresholds& th = {}) {
  const std::size_t n = cycles.stationary_count();
  if (n < kMinDependenceCycles) {
    throw DataError("check_dependence_structure: need at least " + std::to_string(kMinDependenceCycles) +
                    " cycles");
  }
  std::vector<CheckReport> out;
  const auto xi = cycles.xi(observable);
  const double band = th.sigmas / std::sqrt(static_cast<double>(n));
  {
    CheckReport r;
    r.check_name = "xi_lag2_autocorrelation";
    r.statistic = stats::autocorrelation(xi, 2);
    r.threshold = band;
    r.status = std::abs(r.statistic) <= band ? CheckStatus::kPass : CheckStatus::kFail;
    r.details = "|rho_2| = " + detail::fmt(std::abs(r.statistic)) + " <= " + detail::fmt(band) + " required";
    out.push_back(r);
  }
  {
    CheckReport r;
    r.check_name = "xi_lag1_autocorrelation";
    r.statistic = stats::autocorrelation(xi, 1);
    r.threshold = band;
    r.status = CheckStatus::kVacuous;
    r.details = "reported only: rho_1 = " + detail::fmt(r.statistic);
    out.push_back(r);
  }
  {
    const auto d = cycles.durations();
    const auto half = static_cast<std::ptrdiff_t>(d.size() / 2);
    const auto ks = stats::ks_two_sample({d.begin(), d.begin() + half}, {d.begin() + half, d.end()});
    CheckReport r;
    r.check_name = "duration_halves_ks";
    r.statistic = ks.p_value;
    r.threshold = th.p_value;
    r.status = ks.p_value > th.p_value ? CheckStatus::kPass : CheckStatus::kFail;
    r.details = "KS D = " + detail::fmt(ks.statistic) + ", p = " + detail::fmt(ks.p_value) + " > " +
                detail::fmt(th.p_value) + " required";
    out.push_back(r);
  }
  {
    CheckReport r;
    r.check_name = "start_state_chi_square";
    r.threshold = th.p_value;
    const bool have_states = std::all_of(cycles.records.begin(), cycles.records.end(),
                                         [](const RegenerationRecord& c) { return c.start_state.has_value(); });
    if (!nu || !have_states) {
      r.status = CheckStatus::kVacuous;
      r.details = "no start states or reference law";
    } else {
      // states with expected count below 5 are pooled into one cell
      std::vector<double> counts(static_cast<std::size_t>(nu->size()), 0.0);
      for (const auto& c : cycles.records) {
        if (*c.start_state >= counts.size()) throw DataError("start state out of range");
        counts[*c.start_state] += 1.0;
      }
      std::vector<double> obs;
      std::vector<double> probs;
      double rest_obs = 0.0;
      double rest_p = 0.0;
      for (std::size_t s = 0; s < counts.size(); ++s) {
        const double p = (*nu)[static_cast<Eigen::Index>(s)];
        if (p * static_cast<double>(n) >= 5.0) {
          obs.push_back(counts[s]);
          probs.push_back(p);
        } else {
          rest_obs += counts[s];
          rest_p += p;
        }
      }
      if (rest_p > 0.0 || rest_obs > 0.0) {
        obs.push_back(rest_obs);
        probs.push_back(rest_p);
      }
      if (obs.size() < 2) {
        r.status = CheckStatus::kVacuous;
        r.details = "reference law is a point mass";
      } else {
        const auto chi = stats::chi_square_gof(obs, probs);
        r.statistic = chi.p_value;
        r.status = chi.p_value > th.p_value ? CheckStatus::kPass : CheckStatus::kFail;
        r.details = "chi2 = " + detail::fmt(chi.statistic) + " on " + std::to_string(chi.dof) + " dof, p = " +
                    detail::fmt(chi.p_value) + " > " + detail::fmt(th.p_value) + " required";
      }
    }
    out.push_back(r);
  }
  return out;
}

/// Hill estimate of the tail index on the top ceil(sqrt(N)) order statistics.
inline CheckReport check_tail_index(std::span<const double> durations, double alpha_expected,
                                    const VerifyThresholds& th = {}) {
  if (durations.size() < kMinTailIndexSamples) {
    throw DataError("check_tail_index: need at least " + std::to_string(kMinTailIndexSamples) + " samples");
  }
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(durations.size()))));
  CheckReport r;
  r.check_name = "tail_index_hill";
  r.statistic = stats::hill_estimator(durations, k);
  r.threshold = th.hill_tolerance;
  const double half = stats::hill_estimator(durations, std::max<std::size_t>(2, k / 2));
  const double twice = stats::hill_estimator(durations, 2 * k);
  const std::string sens = "; k/2 -> " + detail::fmt(half) + ", 2k -> " + detail::fmt(twice);
  if (r.statistic >= th.light_tail_index) {
    r.status = CheckStatus::kVacuous;
    r.details = "light tail: alpha_hat = " + detail::fmt(r.statistic) + " (k = " + std::to_string(k) + ")" + sens;
    return r;
  }
  r.status = std::abs(r.statistic - alpha_expected) <= th.hill_tolerance ? CheckStatus::kPass : CheckStatus::kFail;
  r.details = "alpha_hat = " + detail::fmt(r.statistic) + " (k = " + std::to_string(k) + "), expected " +
              detail::fmt(alpha_expected) + " +- " + detail::fmt(th.hill_tolerance) + sens;
  return r;
}

/// Passes iff every row is dominated; the statistic is the worst margin
/// ci_high - bound over non-vacuous rows.
inline CheckReport check_bound_domination(const DeviationCurve& curve, std::string name = "bound_domination") {
  if (curve.rows.empty()) throw DataError("check_bound_domination: empty curve");
  CheckReport r;
  r.check_name = std::move(name);
  bool all_vacuous = true;
  bool all_dominated = true;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t failing = 0;
  for (const auto& row : curve.rows) {
    all_dominated = all_dominated && row.dominated;
    if (!row.dominated) ++failing;
    if (!row.bound.vacuous) {
      all_vacuous = false;
      worst = std::max(worst, row.ci_high - row.bound.total);
    }
  }
  r.statistic = all_vacuous ? 0.0 : worst;
  r.threshold = 0.0;
  if (all_vacuous) {
    r.status = CheckStatus::kVacuous;
    r.details = "all " + std::to_string(curve.rows.size()) + " rows vacuous";
  } else {
    r.status = all_dominated ? CheckStatus::kPass : CheckStatus::kFail;
    r.details = std::to_string(failing) + " of " + std::to_string(curve.rows.size()) +
                " rows not dominated; worst ci_high - bound = " + detail::fmt(worst);
  }
  return r;
}

/// True when no report failed.
inline bool all_passed(const std::vector<CheckReport>& reports) {
  return std::none_of(reports.begin(), reports.end(),
                      [](const CheckReport& r) { return r.status == CheckStatus::kFail; });
}

/// Fault injection: every cycle's increments are replaced by the sum over
/// `width` consecutive cycles, which correlates cycles `width - 1` apart.
inline RegenerationStream splice_cycles(const RegenerationStream& cycles, std::size_t width = 3) {
  if (width < 2) throw DomainError("splice width must be >= 2");
  if (cycles.records.size() < width) throw DataError("too few cycles to splice");
  RegenerationStream out = cycles;
  out.records.resize(cycles.records.size() - width + 1);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    auto& rec = out.records[i];
    for (std::size_t w = 1; w < width; ++w) {
      const auto& next = cycles.records[i + w];
      rec.duration += next.duration;
      for (std::size_t j = 0; j < rec.xi.size(); ++j) rec.xi[j] += next.xi[j];
    }
  }
  return out;
}

/// Fault injection: every bound divided by `factor`.
inline DeviationCurve scale_bounds(DeviationCurve curve, double factor) {
  if (!(factor > 0.0)) throw DomainError("bound scale factor must be > 0");
  for (auto& row : curve.rows) {
    row.bound.gaussian_term /= factor;
    row.bound.exponential_term /= factor;
    row.bound.clock_term /= factor;
    row.bound = finish_bound(row.bound);
    row.dominated = row.bound.vacuous || row.ci_high <= row.bound.total;
  }
  return curve;
}

}  // namespace regen
