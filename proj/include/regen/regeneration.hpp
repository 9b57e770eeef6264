#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "regen/cycles.hpp"
#include "regen/error.hpp"
#include "regen/models/diffusion.hpp"
#include "regen/observable.hpp"
#include "regen/parallel.hpp"
#include "regen/random.hpp"
#include "regen/splitting.hpp"
#include "regen/stats.hpp"

namespace regen {

/// Estimate of sup_x E_x int_0^{R_1} |f| over a set of start points.
struct CfEstimate {
  double value = 0.0;                   ///< max over starts of mean + 2 standard errors
  std::vector<double> starts;           ///< start states (as indices) or positions
  std::vector<stats::Estimate> per_start;
  std::size_t argmax = 0;
  std::size_t runs_per_start = 0;
};

namespace detail {

inline CfEstimate finish_cf(std::vector<double> starts, std::vector<stats::Estimate> per_start,
                            std::size_t runs) {
  CfEstimate out;
  out.starts = std::move(starts);
  out.per_start = std::move(per_start);
  out.runs_per_start = runs;
  for (std::size_t i = 0; i < out.per_start.size(); ++i) {
    const double upper = out.per_start[i].value + 2.0 * out.per_start[i].stderr_;
    if (i == 0 || upper > out.value) {
      out.value = upper;
      out.argmax = i;
    }
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

}  // namespace detail

/// C(f) for a finite chain: every state is a start state.
inline CfEstimate estimate_cf(const SplitChain& chain, const StateObservable& f,
                              std::size_t n_per_state, std::uint64_t seed,
                              std::size_t workers = 1) {
  if (n_per_state < 2) throw DomainError("estimate_cf needs n_per_state >= 2");
  const std::size_t n = chain.model().size();
  if (static_cast<std::size_t>(f.values.size()) != n) {
    throw DomainError("observable '" + f.name + "' has the wrong length");
  }
  const StateObservable g = f.abs();
  const std::vector<StateObservable> obs{g};
  std::vector<stats::Estimate> per(n);
  parallel_blocks(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      Stream rng(seed, static_cast<std::uint32_t>(x), StreamTag::kConstants);
      stats::Moments m;
      for (std::size_t r = 0; r < n_per_state; ++r) m.add(chain.first_cycle(x, obs, rng).xi[0]);
      per[x] = {m.mean(), m.stderr_mean()};
    }
  });
  std::vector<double> starts(n);
  for (std::size_t x = 0; x < n; ++x) starts[x] = static_cast<double>(x);
  return detail::finish_cf(std::move(starts), std::move(per), n_per_state);
}

/// `points` equispaced start positions spanning the support of f and the
/// regeneration levels.
inline std::vector<double> diffusion_start_grid(const Diffusion1D& model, const LineObservable& f,
                                                std::size_t points = 21) {
  if (points < 2) throw DomainError("start grid needs at least 2 points");
  double lo = std::min(model.level_a, model.level_b);
  double hi = std::max(model.level_a, model.level_b);
  if (f.has_support()) {
    lo = std::min(lo, f.support_lo);
    hi = std::max(hi, f.support_hi);
  }
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

/// C(f) for a diffusion over an explicit list of start positions.
inline CfEstimate estimate_cf(const Diffusion1D& model, const LineObservable& f,
                              std::span<const double> starts, std::size_t n_per_state,
                              std::uint64_t seed, std::size_t workers = 1) {
  if (n_per_state < 2) throw DomainError("estimate_cf needs n_per_state >= 2");
  if (starts.empty()) throw DomainError("estimate_cf needs start positions");
  const std::vector<LineObservable> obs{f.abs()};
  std::vector<stats::Estimate> per(starts.size());
  parallel_blocks(starts.size(), workers, [&](std::size_t begin, std::size_t end) {
    DiffusionStepper stepper(model, obs);
    for (std::size_t i = begin; i < end; ++i) {
      Stream rng(seed, static_cast<std::uint32_t>(i), StreamTag::kConstants);
      stats::Moments m;
      std::size_t truncated = 0;
      while (m.count() < n_per_state) {
        auto rec = stepper.run_cycle(starts[i], rng);
        if (!rec) {
          if (++truncated > 1000 + 10 * n_per_state) {
            throw NumericError("estimate_cf: almost every first cycle is truncated");
          }
          continue;
        }
        m.add(rec->xi[0]);
      }
      per[i] = {m.mean(), m.stderr_mean()};
    }
  });
  return detail::finish_cf({starts.begin(), starts.end()}, std::move(per), n_per_state);
}

struct VstarPoint {
  double t = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct LaplacePoint {
  double lambda = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Constants entering the deviation bounds.
struct ConstantEstimates {
  std::string observable;
  double sup_norm = 0.0;
  stats::Estimate c_f;
  double k_f = 0.0;
  double b_f = 0.0;
  stats::Estimate m_hat;
  std::size_t cycles = 0;
  std::vector<VstarPoint> vstar;
  std::vector<LaplacePoint> laplace;

  /// v*_t at a tabulated t.
  double vstar_at(double t) const {
    for (const auto& p : vstar) {
      if (p.t == t) return p.value;
    }
    throw DomainError("no v*_t estimate tabulated at t = " + std::to_string(t));
  }
};

/// K(f) = sup|f| + C(f), B(f) = max(K^2, K).
inline std::pair<double, double> k_and_b(double sup_norm, double c_f) {
  if (!(sup_norm >= 0.0) || !(c_f >= 0.0)) throw DomainError("sup_norm and C(f) must be >= 0");
  const double k = sup_norm + c_f;
  return {k, std::max(k * k, k)};
}

inline constexpr std::size_t kMinStationaryCycles = 100;

inline ConstantEstimates constants_from_cycles(const RegenerationStream& cycles, double sup_norm,
                                               stats::Estimate c_f, std::string observable = {}) {
  if (cycles.stationary_count() < kMinStationaryCycles) {
    throw DataError("constants_from_cycles: need at least " + std::to_string(kMinStationaryCycles) +
                    " stationary cycles, got " + std::to_string(cycles.stationary_count()));
  }
  ConstantEstimates out;
  out.observable = std::move(observable);
  out.sup_norm = sup_norm;
  out.c_f = c_f;
  std::tie(out.k_f, out.b_f) = k_and_b(sup_norm, c_f.value);
  const auto d = cycles.durations();
  out.m_hat = stats::mean_estimate(d);
  out.cycles = d.size();
  if (!(out.m_hat.value > 0.0)) throw DataError("mean cycle duration is not positive");
  return out;
}

/// Sample mean of exp(-lambda * duration) with its standard error.
inline stats::Estimate empirical_laplace(std::span<const double> durations, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("empirical_laplace: lambda must be >= 0");
  if (durations.empty()) throw DataError("empirical_laplace: no durations");
  if (lambda == 0.0) return {1.0, 0.0};
  stats::Moments m;
  for (double d : durations) m.add(std::exp(-lambda * d));
  return {m.mean(), m.stderr_mean()};
}

inline stats::Estimate empirical_laplace(const RegenerationStream& cycles, double lambda) {
  const auto d = cycles.durations();
  return empirical_laplace(d, lambda);
}

inline std::vector<LaplacePoint> laplace_table(std::span<const double> durations,
                                               std::span<const double> lambdas) {
  std::vector<LaplacePoint> out;
  for (double l : lambdas) {
    const auto e = empirical_laplace(durations, l);
    out.push_back({l, e.value, e.stderr_});
  }
  return out;
}

/// N_t samples per (t, replication) and v*_t = mean(N_t) + 1.
struct CountTable {
  std::vector<double> t_grid;
  std::vector<std::vector<double>> n_t;  ///< [t index][replication]
  std::vector<VstarPoint> vstar;
};

/// N_t = sup{n : R_n <= t} from per-replication cycle durations, R_0 = 0.
inline CountTable count_regenerations(const std::vector<std::vector<double>>& durations,
                                      std::span<const double> t_grid) {
  if (t_grid.empty()) throw DomainError("count_regenerations: empty t grid");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) {
    throw DomainError("count_regenerations: t grid must be sorted");
  }
  if (durations.empty()) throw DataError("count_regenerations: no replications");
  const double t_max = t_grid.back();
  CountTable out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  out.n_t.assign(t_grid.size(), std::vector<double>(durations.size(), 0.0));
  for (std::size_t r = 0; r < durations.size(); ++r) {
    double total = 0.0;
    std::size_t count = 0;
    std::size_t k = 0;
    for (double d : durations[r]) {
      if (!(d > 0.0)) throw DataError("replication " + std::to_string(r) + " has a non-positive duration");
      total += d;
      while (k < t_grid.size() && t_grid[k] < total) out.n_t[k++][r] = static_cast<double>(count);
      if (k == t_grid.size()) break;
      ++count;
    }
    if (k < t_grid.size()) {
      throw DataError("replication " + std::to_string(r) + " covers only " + std::to_string(total) +
                      " time units, less than t = " + std::to_string(t_max));
    }
  }
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const auto e = stats::mean_estimate(out.n_t[k]);
    out.vstar.push_back({t_grid[k], e.value + 1.0, e.stderr_});
  }
  return out;
}

/// Ratio of cycle sums with a delta-method confidence interval.
struct KacRatio {
  double ratio = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.99;
};

/// sum xi(f) / sum xi(g) over stationary cycles. The variance of
/// xi(f) - r xi(g) includes the lag-1 covariance of the 1-dependent sequence.
inline KacRatio kac_ratio(const RegenerationStream& cycles, std::size_t f_index,
                          std::size_t g_index, double confidence = 0.99) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  const auto xf = cycles.xi(f_index);
  const auto xg = cycles.xi(g_index);
  const std::size_t n = xf.size();
  if (n < 3) throw DataError("kac_ratio: need at least 3 stationary cycles");
  double sf = 0.0;
  double sg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sf += xf[i];
    sg += xg[i];
  }
  if (sg == 0.0) throw DataError("kac_ratio: observable has zero cycle sum (degenerate denominator)");
  KacRatio out;
  out.confidence = confidence;
  out.ratio = sf / sg;
  if (f_index == g_index) {
    out.ratio = 1.0;
    out.ci_low = out.ci_high = 1.0;
    return out;
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = xf[i] - out.ratio * xg[i];
  const double zbar = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
  double g0 = 0.0;
  double g1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) g0 += (z[i] - zbar) * (z[i] - zbar);
  for (std::size_t i = 0; i + 1 < n; ++i) g1 += (z[i] - zbar) * (z[i + 1] - zbar);
  g0 /= static_cast<double>(n);
  g1 /= static_cast<double>(n);
  const double var = std::max(g0 + 2.0 * g1, 0.0);
  const double mean_g = sg / static_cast<double>(n);
  out.stderr_ = std::sqrt(var / static_cast<double>(n)) / std::abs(mean_g);
  const double zq = stats::normal_quantile(0.5 + 0.5 * confidence);
  out.ci_low = out.ratio - zq * out.stderr_;
  out.ci_high = out.ratio + zq * out.stderr_;
  return out;
}

}  // namespace regen
