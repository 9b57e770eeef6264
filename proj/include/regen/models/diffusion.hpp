#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regen/cycles.hpp"
#include "regen/error.hpp"
#include "regen/observable.hpp"
#include "regen/random.hpp"

namespace regen {

/// How a level crossing between two grid points is detected.
enum class CrossingRule {
  kSignChange,      ///< only when consecutive grid values straddle the level
  kBrownianBridge,  ///< also crossings of the Brownian bridge between grid points
};

/// One-dimensional diffusion dX = b(X) dt + sigma(X) dW simulated by the Euler
/// scheme, regenerating at level `level_a` after each visit to `level_b`.
struct Diffusion1D {
  std::string name = "diffusion";
  std::function<double(double)> drift;
  std::function<double(double)> dispersion;
  double level_a = 0.0;
  double level_b = 1.0;
  double step = 1e-4;
  CrossingRule crossing = CrossingRule::kSignChange;
  double max_cycle_duration = std::numeric_limits<double>::infinity();
  /// Set when the drift is zero and the dispersion is this constant. Paths
  /// that leave the observation window are then returned to it by an exact
  /// hitting-time draw instead of Euler steps.
  std::optional<double> brownian_sigma;

  void validate() const {
    if (!drift || !dispersion) throw ModelError("diffusion needs drift and dispersion");
    if (!std::isfinite(level_a) || !std::isfinite(level_b) || level_a == level_b) {
      throw ModelError("regeneration levels must be distinct and finite");
    }
    if (!(step > 0.0) || !std::isfinite(step)) throw ModelError("Euler step must be > 0");
    if (!(max_cycle_duration > 0.0)) throw ModelError("max_cycle_duration must be > 0");
    if (brownian_sigma && !(*brownian_sigma > 0.0)) throw ModelError("sigma must be > 0");
  }
};

inline Diffusion1D make_brownian(double sigma = 1.0, double level_a = 0.0, double level_b = 1.0,
                                 double step = 1e-4) {
  Diffusion1D d;
  d.name = "bm";
  d.drift = [](double) { return 0.0; };
  d.dispersion = [sigma](double) { return sigma; };
  d.level_a = level_a;
  d.level_b = level_b;
  d.step = step;
  d.brownian_sigma = sigma;
  d.validate();
  return d;
}

/// Ornstein-Uhlenbeck process dX = -theta X dt + sigma dW.
inline Diffusion1D make_ornstein_uhlenbeck(double theta = 1.0, double sigma = 1.0,
                                           double level_a = 0.0, double level_b = 1.0,
                                           double step = 1e-4) {
  if (!(theta > 0.0)) throw ModelError("OU mean-reversion rate must be > 0");
  Diffusion1D d;
  d.name = "ou";
  d.drift = [theta](double x) { return -theta * x; };
  d.dispersion = [sigma](double) { return sigma; };
  d.level_a = level_a;
  d.level_b = level_b;
  d.step = step;
  d.validate();
  return d;
}

/// Exact sample of a Brownian cycle length: hitting time of level_b from level_a
/// plus the return time, each distributed as (distance / sigma)^2 / Z^2.
inline double sample_bm_cycle_duration(Stream& rng, double distance = 1.0, double sigma = 1.0) {
  const double scale = (distance / sigma) * (distance / sigma);
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return scale / (z1 * z1) + scale / (z2 * z2);
}

/// Integral of `f` against the speed density of the diffusion,
/// m(x) = 2 / sigma(x)^2 * exp(int_0^x 2 b / sigma^2), over the support of f.
/// For Brownian motion this is twice the Lebesgue integral.
inline double speed_measure_integral(const Diffusion1D& model, const LineObservable& f,
                                     std::size_t panels = 20000) {
  if (!f.has_support()) return 0.0;
  if (model.brownian_sigma && !f.pieces.empty()) {
    return 2.0 / (*model.brownian_sigma * *model.brownian_sigma) * f.lebesgue_integral();
  }
  const double lo = f.support_lo;
  const double hi = f.support_hi;
  const auto scale_rate = [&](double x) {
    const double s = model.dispersion(x);
    return 2.0 * model.drift(x) / (s * s);
  };
  // log scale function from 0 to x by Simpson's rule on a fixed panel count
  const auto log_scale = [&](double x) {
    const int n = 200;
    const double h = x / n;
    double acc = scale_rate(0.0) + scale_rate(x);
    for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * scale_rate(k * h);
    return acc * h / 3.0;
  };
  const auto integrand = [&](double x) {
    const double s = model.dispersion(x);
    return f(x) * 2.0 / (s * s) * std::exp(log_scale(x));
  };
  // midpoint rule copes with the jumps of piecewise observables
  const double h = (hi - lo) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t k = 0; k < panels; ++k) total += integrand(lo + (static_cast<double>(k) + 0.5) * h);
  return total * h;
}

/// Result of a cycle run: the cycles in order plus the number of discarded
/// cycles that exceeded `max_cycle_duration`.
struct DiffusionCycles {
  std::vector<RegenerationRecord> cycles;
  std::size_t truncated = 0;
};

/// Euler engine shared by cycle extraction and fixed-horizon integration.
class DiffusionStepper {
 public:
  DiffusionStepper(const Diffusion1D& model, std::span<const LineObservable> observables)
      : model_(model), observables_(observables.begin(), observables.end()) {
    model_.validate();
    lo_ = std::min(model_.level_a, model_.level_b);
    hi_ = std::max(model_.level_a, model_.level_b);
    for (const auto& f : observables_) {
      if (f.has_support()) {
        lo_ = std::min(lo_, f.support_lo);
        hi_ = std::max(hi_, f.support_hi);
      } else if (model_.brownian_sigma && f.eval && f.sup_norm > 0.0) {
        throw DomainError("exact excursions need observables with compact support");
      }
    }
    values_.resize(observables_.size());
    next_.resize(observables_.size());
    brownian_ = model_.brownian_sigma.has_value();
    sigma_ = model_.brownian_sigma.value_or(0.0);
  }

  const Diffusion1D& model() const { return model_; }
  std::size_t observable_count() const { return observables_.size(); }

  /// Runs from `x0` until the path has visited level_b (immediately if
  /// `seen_b`) and then returns to level_a. Returns nullopt on truncation.
  std::optional<RegenerationRecord> run_cycle(double x0, Stream& rng, bool seen_b = false) {
    RegenerationRecord rec;
    rec.xi.assign(observables_.size(), 0.0);
    double x = x0;
    double t = 0.0;
    bool phase_b = seen_b;
    evaluate(x, values_);
    const double dt = model_.step;
    const double sqdt = std::sqrt(dt);
    while (t < model_.max_cycle_duration) {
      const double sigma = brownian_ ? sigma_ : model_.dispersion(x);
      const double x_new =
          brownian_ ? x + sigma * sqdt * rng.normal() : x + model_.drift(x) * dt + sigma * sqdt * rng.normal();
      const double target = phase_b ? model_.level_a : model_.level_b;
      double theta = -1.0;
      if ((x - target) * (x_new - target) <= 0.0 && x != target) {
        theta = (x - target) / (x - x_new);
      } else if (model_.crossing == CrossingRule::kBrownianBridge) {
        const double p = std::exp(-2.0 * (x - target) * (x_new - target) / (sigma * sigma * dt));
        if (rng.uniform() < p) theta = 0.5;
      }
      if (theta >= 0.0) {
        const double sub = theta * dt;
        evaluate(target, next_);
        accumulate(rec.xi, sub);
        t += sub;
        x = target;
        std::swap(values_, next_);
        if (phase_b) {
          rec.duration = t;
          return rec;
        }
        phase_b = true;
        continue;
      }
      evaluate(x_new, next_);
      accumulate(rec.xi, dt);
      t += dt;
      x = x_new;
      std::swap(values_, next_);
      if (model_.brownian_sigma && (x < lo_ || x > hi_)) {
        const double edge = x < lo_ ? lo_ : hi_;
        const double d = std::abs(x - edge) / *model_.brownian_sigma;
        const double z = rng.normal();
        t += d * d / (z * z);
        x = edge;
        evaluate(x, values_);
      }
    }
    return std::nullopt;
  }

  /// Integrals of the observables over [0, t] for each t in the sorted `horizons`.
  std::vector<std::vector<double>> integrate(double x0, std::span<const double> horizons,
                                             Stream& rng) {
    std::vector<std::vector<double>> out(horizons.size(),
                                         std::vector<double>(observables_.size(), 0.0));
    if (horizons.empty()) return out;
    std::vector<double> acc(observables_.size(), 0.0);
    double x = x0;
    double t = 0.0;
    std::size_t next_h = 0;
    evaluate(x, values_);
    const double dt = model_.step;
    const double sqdt = std::sqrt(dt);
    while (next_h < horizons.size()) {
      const double x_new = brownian_ ? x + sigma_ * sqdt * rng.normal()
                                     : x + model_.drift(x) * dt + model_.dispersion(x) * sqdt * rng.normal();
      evaluate(x_new, next_);
      while (next_h < horizons.size() && horizons[next_h] <= t + dt) {
        const double part = horizons[next_h] - t;
        for (std::size_t k = 0; k < acc.size(); ++k) {
          // trapezoid over the partial step with the linearly interpolated endpoint
          const double w = part / dt;
          const double end = values_[k] + w * (next_[k] - values_[k]);
          out[next_h][k] = acc[k] + 0.5 * part * (values_[k] + end);
        }
        ++next_h;
      }
      accumulate(acc, dt);
      t += dt;
      x = x_new;
      std::swap(values_, next_);
      if (model_.brownian_sigma && (x < lo_ || x > hi_)) {
        const double edge = x < lo_ ? lo_ : hi_;
        const double d = std::abs(x - edge) / *model_.brownian_sigma;
        const double z = rng.normal();
        const double t_back = t + d * d / (z * z);
        while (next_h < horizons.size() && horizons[next_h] <= t_back) {
          out[next_h] = acc;
          ++next_h;
        }
        t = t_back;
        x = edge;
        evaluate(x, values_);
      }
    }
    return out;
  }

 private:
  void evaluate(double x, std::vector<double>& into) const {
    for (std::size_t k = 0; k < observables_.size(); ++k) into[k] = observables_[k](x);
  }

  void accumulate(std::vector<double>& xi, double width) const {
    for (std::size_t k = 0; k < xi.size(); ++k) xi[k] += 0.5 * width * (values_[k] + next_[k]);
  }

  Diffusion1D model_;
  std::vector<LineObservable> observables_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  bool brownian_ = false;
  double sigma_ = 0.0;
  std::vector<double> values_;
  std::vector<double> next_;
};

/// Euler-discretized path started at level_a, cut into cycles at alternating
/// hits of level_b then level_a. Over-long cycles are discarded and counted.
inline DiffusionCycles simulate_diffusion_cycles(const Diffusion1D& model, std::size_t n_cycles,
                                                 std::span<const LineObservable> observables,
                                                 Stream& rng) {
  if (n_cycles < 1) throw DomainError("n_cycles must be >= 1");
  DiffusionStepper stepper(model, observables);
  DiffusionCycles out;
  out.cycles.reserve(n_cycles);
  while (out.cycles.size() < n_cycles) {
    auto rec = stepper.run_cycle(model.level_a, rng);
    if (!rec) {
      if (++out.truncated > 1000 + 10 * n_cycles) {
        throw NumericError("almost every cycle exceeds max_cycle_duration");
      }
      continue;
    }
    rec->index = out.cycles.size() + 1;
    out.cycles.push_back(std::move(*rec));
  }
  return out;
}

}  // namespace regen
