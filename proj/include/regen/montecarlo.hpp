#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regen/bounds.hpp"
#include "regen/error.hpp"
#include "regen/models/ctmc.hpp"
#include "regen/models/diffusion.hpp"
#include "regen/observable.hpp"
#include "regen/parallel.hpp"
#include "regen/random.hpp"
#include "regen/regeneration.hpp"
#include "regen/splitting.hpp"
#include "regen/stats.hpp"

namespace regen {

enum class Method { kForward, kRetrospective, kHitting };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kForward: return "forward";
    case Method::kRetrospective: return "retrospective";
    case Method::kHitting: return "hitting";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "forward") return Method::kForward;
  if (s == "retrospective") return Method::kRetrospective;
  if (s == "hitting") return Method::kHitting;
  throw ConfigError("unknown method '" + s + "'");
}

inline constexpr std::size_t kMinTailSamples = 1000;

struct ExperimentConfig {
  std::string observable;
  Regime regime = Regime::kPositiveEta;
  std::vector<double> t_grid;
  std::vector<double> x_grid;
  double eta = 0.5;
  std::size_t replications = kMinTailSamples;
  std::uint64_t master_seed = 1;
  Method method = Method::kRetrospective;
  std::size_t workers = 1;

  void validate() const {
    if (t_grid.empty() || x_grid.empty()) throw ConfigError("t_grid and x_grid must be nonempty");
    if (!std::is_sorted(t_grid.begin(), t_grid.end()) || !std::is_sorted(x_grid.begin(), x_grid.end())) {
      throw ConfigError("t_grid and x_grid must be sorted");
    }
    if (!(t_grid.front() > 0.0)) throw ConfigError("t_grid entries must be > 0");
    if (!(x_grid.front() > 0.0)) throw ConfigError("x_grid entries must be > 0");
    if (replications < kMinTailSamples) {
      throw ConfigError("replications must be >= " + std::to_string(kMinTailSamples));
    }
    if (!(eta > 0.0 && eta <= 0.5)) throw ConfigError("eta must lie in (0, 1/2]");
  }
};

/// Produces A_t = int_0^t f(X_s) ds at sorted horizons for one replication.
class PathIntegrator {
 public:
  virtual ~PathIntegrator() = default;
  virtual std::vector<double> integrate(std::span<const double> horizons, Stream& rng) const = 0;
};

/// Exact piecewise-constant integration along a CTMC path whose start state
/// is drawn from `initial_law`.
class CtmcIntegrator final : public PathIntegrator {
 public:
  CtmcIntegrator(const CtmcModel& model, StateObservable f, Eigen::VectorXd initial_law)
      : model_(model), f_(std::move(f)), initial_(std::move(initial_law)) {
    if (static_cast<std::size_t>(f_.values.size()) != model_.size() ||
        static_cast<std::size_t>(initial_.size()) != model_.size()) {
      throw ConfigError("observable or initial law does not match the model size");
    }
    if ((initial_.array() < 0.0).any() || !(initial_.sum() > 0.0)) {
      throw ConfigError("initial law must be a nonnegative, nonzero vector");
    }
  }

  std::vector<double> integrate(std::span<const double> horizons, Stream& rng) const override {
    std::vector<double> out(horizons.size(), 0.0);
    std::size_t x = sample_categorical(initial_, rng);
    double t = 0.0;
    double acc = 0.0;
    std::size_t k = 0;
    while (k < horizons.size()) {
      const double end = t + rng.exponential(model_.exit_rate(x));
      const double fx = f_(x);
      while (k < horizons.size() && horizons[k] <= end) {
        out[k] = acc + fx * (horizons[k] - t);
        ++k;
      }
      acc += fx * (end - t);
      t = end;
      x = model_.jump_target(x, rng.uniform());
    }
    return out;
  }

 private:
  const CtmcModel& model_;
  StateObservable f_;
  Eigen::VectorXd initial_;
};

/// Euler/trapezoid integration of a diffusion started at `x0`.
class DiffusionIntegrator final : public PathIntegrator {
 public:
  DiffusionIntegrator(Diffusion1D model, LineObservable f, double x0)
      : model_(std::move(model)), f_(std::move(f)), x0_(x0) {
    model_.validate();
  }

  std::vector<double> integrate(std::span<const double> horizons, Stream& rng) const override {
    const std::vector<LineObservable> obs{f_};
    DiffusionStepper stepper(model_, obs);
    const auto rows = stepper.integrate(x0_, horizons, rng);
    std::vector<double> out(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) out[k] = rows[k][0];
    return out;
  }

 private:
  Diffusion1D model_;
  LineObservable f_;
  double x0_;
};

/// A_t samples laid out [t index][replication].
struct SampleTable {
  std::vector<double> t_grid;
  std::vector<std::vector<double>> values;
};

/// Replication r draws from the stream keyed on (master_seed, r), so the
/// table does not depend on the worker count.
inline SampleTable run_replications(const PathIntegrator& integrator, std::span<const double> t_grid,
                                    std::size_t replications, std::uint64_t master_seed,
                                    std::size_t workers = 1) {
  if (t_grid.empty()) throw ConfigError("t_grid must be nonempty");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw ConfigError("t_grid must be sorted");
  if (replications == 0) throw ConfigError("replications must be >= 1");
  SampleTable table;
  table.t_grid.assign(t_grid.begin(), t_grid.end());
  table.values.assign(t_grid.size(), std::vector<double>(replications, 0.0));
  parallel_blocks(replications, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      auto rng = replication_stream(master_seed, r, StreamTag::kReplication);
      const auto a = integrator.integrate(t_grid, rng);
      for (std::size_t k = 0; k < a.size(); ++k) table.values[k][r] = a[k];
    }
  });
  return table;
}

inline SampleTable run_replications(const PathIntegrator& integrator, const ExperimentConfig& cfg) {
  cfg.validate();
  return run_replications(integrator, cfg.t_grid, cfg.replications, cfg.master_seed, cfg.workers);
}

struct TailEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::size_t exceedances = 0;
  std::size_t samples = 0;
};

/// Fraction of |sample| >= threshold with an exact 99% binomial interval.
inline TailEstimate tail_probability(std::span<const double> samples, double threshold,
                                     double confidence = 0.99) {
  if (samples.empty()) throw DataError("tail_probability: no samples");
  if (samples.size() < kMinTailSamples) {
    throw DataError("tail_probability: need at least " + std::to_string(kMinTailSamples) + " samples");
  }
  TailEstimate out;
  out.samples = samples.size();
  for (double s : samples) {
    if (std::abs(s) >= threshold) ++out.exceedances;
  }
  const auto ci = stats::clopper_pearson(out.exceedances, out.samples, confidence);
  out.p_hat = static_cast<double>(out.exceedances) / static_cast<double>(out.samples);
  out.ci_low = ci.low;
  out.ci_high = ci.high;
  return out;
}

struct CurveRow {
  double t = 0.0;
  double x = 0.0;
  double eta = 0.0;
  Regime regime = Regime::kPositiveEta;
  double level = 0.0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  BoundValue bound;
  bool dominated = false;
};

struct DeviationCurve {
  std::vector<CurveRow> rows;
};

/// Tail estimates against the bound of `base.regime` on the (t, x) grid of
/// `samples` and `x_grid`. `base` carries the constants; t, x, and (null
/// regime) v*_t are filled in per row, v*_t from `vstar`.
inline DeviationCurve deviation_curve(const SampleTable& samples, std::span<const double> x_grid,
                                      BoundQuery base, std::span<const VstarPoint> vstar = {}) {
  if (x_grid.empty()) throw ConfigError("x_grid must be nonempty");
  // the clock rate does not depend on (t, x) in the positive regimes
  if ((base.regime == Regime::kPositiveEta || base.regime == Regime::kPositiveClt) && !base.clock_rate &&
      base.laplace) {
    base.clock_rate = legendre_star(*base.laplace, 2.0 * base.m / 3.0, base.lambda_cap);
  }
  DeviationCurve curve;
  for (std::size_t k = 0; k < samples.t_grid.size(); ++k) {
    BoundQuery q = base;
    q.t = samples.t_grid[k];
    if (q.regime == Regime::kNullGeneral) {
      const auto it = std::find_if(vstar.begin(), vstar.end(), [&](const VstarPoint& p) { return p.t == q.t; });
      if (it == vstar.end()) throw DataError("no v*_t estimate at t = " + std::to_string(q.t));
      q.vstar_t = it->value;
    }
    if (q.regime == Regime::kRegular && !base.clock_rate) {
      q.clock_rate = regular_clock_rate(*q.laplace, q.t, q.alpha_reg.value_or(0.5), q.eta,
                                        q.slowly_varying.value_or(1.0));
    }
    for (double x : x_grid) {
      q.x = x;
      CurveRow row;
      row.t = q.t;
      row.x = x;
      row.eta = q.eta;
      row.regime = q.regime;
      row.bound = evaluate_bound(q);
      row.level = row.bound.level;
      const auto tail = tail_probability(samples.values[k], row.level);
      row.p_hat = tail.p_hat;
      row.ci_low = tail.ci_low;
      row.ci_high = tail.ci_high;
      row.dominated = row.bound.vacuous || row.ci_high <= row.bound.total;
      curve.rows.push_back(row);
    }
  }
  return curve;
}

inline constexpr std::size_t kMinCurveCycles = 10000;

/// `base` completed with the regime and eta of `cfg` and the estimated constants.
inline BoundQuery bound_query(const ExperimentConfig& cfg, const ConstantEstimates& constants, BoundQuery base) {
  if (constants.cycles < kMinCurveCycles) {
    throw DataError("deviation_curve: constants must come from at least " + std::to_string(kMinCurveCycles) +
                    " cycles");
  }
  base.regime = cfg.regime;
  base.eta = cfg.eta;
  base.sup_norm = constants.sup_norm;
  base.k_f = constants.k_f;
  base.b_f = constants.b_f;
  base.m = constants.m_hat.value;
  if (base.regime == Regime::kPositiveEta || base.regime == Regime::kPositiveClt) base.lambda_cap = 50.0 / base.m;
  return base;
}

/// Runs the replications of `cfg` and compares them with the bound built
/// from `constants`.
inline DeviationCurve deviation_curve(const PathIntegrator& integrator, const ExperimentConfig& cfg,
                                      const ConstantEstimates& constants, BoundQuery base) {
  cfg.validate();
  auto query = bound_query(cfg, constants, std::move(base));
  const auto samples = run_replications(integrator, cfg);
  return deviation_curve(samples, cfg.x_grid, std::move(query), constants.vstar);
}

}  // namespace regen
