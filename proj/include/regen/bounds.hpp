#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regen/error.hpp"
#include "regen/regeneration.hpp"

namespace regen {

/// Laplace transform of the cycle length, evaluated on the log scale.
class LaplaceTransform {
 public:
  /// Wraps an evaluator of F(lambda); values outside [0, 1] are rejected.
  static LaplaceTransform from_function(std::function<double(double)> f) {
    return LaplaceTransform([f = std::move(f)](double lambda) {
      const double v = f(lambda);
      if (!(v >= 0.0 && v <= 1.0 + 1e-12)) {
        throw DomainError("invalid Laplace transform value " + std::to_string(v) + " at lambda = " +
                          std::to_string(lambda));
      }
      return std::log(std::min(v, 1.0));
    });
  }

  /// Empirical transform of cycle durations (log-sum-exp, no underflow).
  static LaplaceTransform empirical(std::vector<double> durations) {
    if (durations.empty()) throw DataError("empirical Laplace transform needs durations");
    for (double d : durations) {
      if (!(d > 0.0) || !std::isfinite(d)) throw DataError("durations must be positive and finite");
    }
    auto shared = std::make_shared<const std::vector<double>>(std::move(durations));
    const double d_min = *std::min_element(shared->begin(), shared->end());
    return LaplaceTransform([shared, d_min](double lambda) {
      double acc = 0.0;
      for (double d : *shared) acc += std::exp(-lambda * (d - d_min));
      return -lambda * d_min + std::log(acc / static_cast<double>(shared->size()));
    });
  }

  /// Brownian cycle between levels `distance` apart: exp(-2 (distance / sigma) sqrt(2 lambda)).
  static LaplaceTransform brownian(double distance = 1.0, double sigma = 1.0) {
    if (!(distance > 0.0) || !(sigma > 0.0)) throw DomainError("distance and sigma must be > 0");
    return LaplaceTransform([c = 2.0 * distance / sigma](double lambda) {
      return -c * std::sqrt(2.0 * lambda);
    });
  }

  double log_value(double lambda) const {
    const double v = log_(lambda);
    if (std::isnan(v) || v > 1e-12) throw DomainError("invalid Laplace transform (log value > 0)");
    return std::min(v, 0.0);
  }

  double operator()(double lambda) const { return std::exp(log_value(lambda)); }

 private:
  explicit LaplaceTransform(std::function<double(double)> log_fn) : log_(std::move(log_fn)) {}
  std::function<double(double)> log_;
};

/// sup_{0 < lambda <= cap} [ -weight log F(lambda) - lambda u ], clipped at 0.
/// The objective is concave in lambda, hence unimodal in log lambda: a
/// bracket is grown geometrically and refined by golden-section search.
inline double maximize_transform(const LaplaceTransform& laplace, double weight, double u,
                                 double lambda_cap = std::numeric_limits<double>::infinity()) {
  if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("Legendre transform needs u > 0");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw DomainError("weight must be > 0");
  if (!(lambda_cap > 0.0)) throw DomainError("lambda cap must be > 0");
  const auto objective = [&](double s) {
    const double lambda = std::exp(s);
    return -weight * laplace.log_value(lambda) - lambda * u;
  };
  const double s_lo = std::log(1e-14 / u);
  const double s_hi = std::min(std::log(1e14 / u), std::log(lambda_cap));
  const double s0 = std::clamp(-std::log(u), s_lo, s_hi);
  const double f0 = objective(s0);
  double left = std::max(s0 - 1.0, s_lo);
  double right = std::min(s0 + 1.0, s_hi);
  double best = f0;
  const double f_right = objective(right);
  const double f_left = objective(left);
  best = std::max({best, f_right, f_left});
  if (f_right > f0 || f_left > f0) {
    // walk uphill with doubling steps until the objective drops or a limit is hit
    const double dir = f_right > f0 ? 1.0 : -1.0;
    double prev = s0;
    double cur = dir > 0 ? right : left;
    double f_cur = dir > 0 ? f_right : f_left;
    for (double step = 2.0;; step *= 2.0) {
      const double next = std::clamp(cur + dir * step, s_lo, s_hi);
      const double f_next = objective(next);
      best = std::max(best, f_next);
      if (f_next <= f_cur || next == s_lo || next == s_hi) {
        left = std::min(prev, next);
        right = std::max(prev, next);
        break;
      }
      prev = cur;
      cur = next;
      f_cur = f_next;
    }
  }
  constexpr double inv_phi = 0.6180339887498949;
  double a = left;
  double b = right;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  best = std::max({best, fc, fd});
  for (int iter = 0; iter < 200 && (b - a) > 1e-10; ++iter) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
      best = std::max(best, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
      best = std::max(best, fd);
    }
    if (std::abs(fc - fd) <= 1e-9 * std::max(std::abs(best), 1e-300) && (b - a) < 1e-6) break;
  }
  return std::max(best, 0.0);
}

/// Lambda*(u) = sup_{lambda > 0} [ -lambda u - log F(lambda) ] >= 0.
inline double legendre_star(const LaplaceTransform& laplace, double u,
                            double lambda_cap = std::numeric_limits<double>::infinity()) {
  return maximize_transform(laplace, 1.0, u, lambda_cap);
}

/// Closed-form sup over 0 < lambda < 1/v of lambda y - lambda^2 v^2 / (1 - lambda v)
/// and its lower bound y^2 / (2 v y + 4 v^2).
struct BirgeMassart {
  double sup_value = 0.0;
  double lower_bound = 0.0;
  double maximizer = 0.0;
};

inline double birge_massart_objective(double lambda, double y, double v) {
  return lambda * y - lambda * lambda * v * v / (1.0 - lambda * v);
}

inline BirgeMassart birge_massart(double y, double v) {
  if (!(y > 0.0) || !(v > 0.0) || !std::isfinite(y) || !std::isfinite(v)) {
    throw DomainError("birge_massart needs y, v > 0");
  }
  BirgeMassart out;
  out.maximizer = (1.0 - std::sqrt(v / (y + v))) / v;
  out.sup_value = birge_massart_objective(out.maximizer, y, v);
  out.lower_bound = y * y / (2.0 * v * y + 4.0 * v * v);
  if (out.sup_value < out.lower_bound * (1.0 - 1e-12)) {
    throw NumericError("Birge-Massart inequality violated");
  }
  return out;
}

enum class Regime { kPositiveEta, kPositiveClt, kNullGeneral, kRegular };

inline std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kPositiveEta: return "positive_eta";
    case Regime::kPositiveClt: return "positive_clt";
    case Regime::kNullGeneral: return "null_general";
    case Regime::kRegular: return "regular";
  }
  return "unknown";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "positive_eta") return Regime::kPositiveEta;
  if (s == "positive_clt") return Regime::kPositiveClt;
  if (s == "null_general") return Regime::kNullGeneral;
  if (s == "regular") return Regime::kRegular;
  throw ConfigError("unknown regime '" + s + "'");
}

struct BoundQuery {
  Regime regime = Regime::kPositiveEta;
  double t = 0.0;
  double x = 1.0;
  double eta = 0.5;
  double sup_norm = 0.0;
  double k_f = 0.0;
  double b_f = 0.0;
  double m = 0.0;                        ///< mean cycle length (positive regimes)
  std::optional<double> vstar_t;         ///< v*_t (null regime)
  std::optional<double> alpha_reg;       ///< stable index (regular regime)
  std::optional<double> slowly_varying;  ///< L(t) (regular regime)
  std::optional<LaplaceTransform> laplace;  ///< cycle-length transform (positive and regular)
  double lambda_cap = std::numeric_limits<double>::infinity();
  std::optional<double> clock_rate;  ///< precomputed Lambda*(2m/3) or Lambda*_t

  static BoundQuery from_constants(Regime regime, const ConstantEstimates& c) {
    BoundQuery q;
    q.regime = regime;
    q.sup_norm = c.sup_norm;
    q.k_f = c.k_f;
    q.b_f = c.b_f;
    q.m = c.m_hat.value;
    if (regime == Regime::kPositiveEta || regime == Regime::kPositiveClt) q.lambda_cap = 50.0 / q.m;
    return q;
  }
};

struct BoundValue {
  double gaussian_term = 0.0;
  double exponential_term = 0.0;
  double clock_term = 0.0;
  double total = 0.0;
  bool vacuous = false;
  double level = 0.0;       ///< deviation level on the left-hand side
  double clock_rate = 0.0;  ///< Lambda*(2m/3) or Lambda*_t
};

/// First t with t^gamma / L * t^{-alpha/2 - eta} >= 1 for constant L.
inline double regular_threshold(double alpha, double eta, double slowly_varying) {
  const double gamma = alpha + 2.0 * eta * (1.0 - alpha) / (2.0 - alpha);
  const double e = gamma - alpha / 2.0 - eta;
  if (!(e > 0.0)) throw DomainError("regular regime threshold exponent is not positive");
  return std::pow(std::max(slowly_varying, 1.0), 1.0 / e);
}

/// Lambda*_t = sup_lambda [ -log F(lambda) t^{alpha - 2 alpha eta / (2 - alpha)} / L - lambda t^{1 - 2 eta / (2 - alpha)} ].
inline double regular_clock_rate(const LaplaceTransform& laplace, double t, double alpha, double eta,
                                 double slowly_varying) {
  const double q = 1.0 - 2.0 * eta / (2.0 - alpha);
  const double weight = std::pow(t, alpha * q) / slowly_varying;
  const double u = std::pow(t, q);
  return maximize_transform(laplace, weight, u);
}

inline BoundValue finish_bound(BoundValue v) {
  v.total = v.gaussian_term + v.exponential_term + v.clock_term;
  v.vacuous = v.total >= 1.0;
  return v;
}

/// Right-hand side of the deviation inequality for the selected regime.
inline BoundValue evaluate_bound(const BoundQuery& q) {
  if (!(q.x > 0.0) || !std::isfinite(q.x)) throw DomainError("deviation level x must be > 0");
  if (!(q.t > 0.0) || !std::isfinite(q.t)) throw DomainError("t must be > 0");
  if (!(q.k_f > 0.0) || !(q.b_f > 0.0)) throw DomainError("K(f) and B(f) must be > 0");
  const double x2x = std::min(q.x * q.x, q.x);
  const double xv1 = std::max(q.x, 1.0);
  const double e = std::exp(1.0);
  BoundValue v;
  switch (q.regime) {
    case Regime::kPositiveEta:
    case Regime::kPositiveClt: {
      if (!(q.m > 0.0) || !std::isfinite(q.m)) throw DomainError("positive regimes need a finite m > 0");
      if (!(q.t > 4.0 * q.m)) {
        throw DomainError("positive regime needs t > 4m (t = " + std::to_string(q.t) +
                          ", 4m = " + std::to_string(4.0 * q.m) + ")");
      }
      if (!q.laplace && !q.clock_rate) throw DomainError("positive regime needs the cycle-length transform");
      v.clock_rate = q.clock_rate ? *q.clock_rate : legendre_star(*q.laplace, 2.0 * q.m / 3.0, q.lambda_cap);
      v.clock_term = 8.0 * std::exp(-q.t * xv1 * 3.0 / (4.0 * q.m) * v.clock_rate);
      if (q.regime == Regime::kPositiveEta) {
        if (!(q.eta > 0.0 && q.eta <= 0.5)) throw DomainError("eta must lie in (0, 1/2]");
        const double p = 0.5 + q.eta;
        v.level = std::pow(q.t, p) * std::pow(2.0 / q.m, p) * q.x;
        v.gaussian_term = 4.0 * std::exp(-std::pow(q.t, 2.0 * q.eta) / (42.0 * q.m * q.b_f) * x2x);
        v.exponential_term =
            4.0 * e * std::exp(-std::pow(2.0, p) / (6.0 * q.k_f * std::pow(q.m, p)) * std::pow(q.t, p) * q.x);
      } else {
        v.level = std::sqrt(q.t) * q.x * std::sqrt(2.0) / std::sqrt(q.m);
        v.gaussian_term = 4.0 * std::exp(-x2x / (42.0 * q.b_f));
        v.exponential_term =
            4.0 * e * std::exp(-std::sqrt(2.0) / (6.0 * q.k_f * std::sqrt(q.m)) * std::sqrt(q.t) * q.x);
      }
      break;
    }
    case Regime::kNullGeneral: {
      if (!(q.eta > 0.0 && q.eta <= 0.5)) throw DomainError("eta must lie in (0, 1/2]");
      if (!q.vstar_t) throw DomainError("null regime needs v*_t");
      const double vs = *q.vstar_t;
      if (!(vs >= 1.0)) throw DomainError("null regime needs t >= t0 (v*_t >= 1)");
      v.level = std::pow(vs, 0.5 + q.eta) * q.x;
      v.gaussian_term = 4.0 * std::exp(-std::pow(vs, q.eta) * x2x / (42.0 * q.b_f));
      v.exponential_term = 4.0 * e * std::exp(-std::pow(vs, 0.5 + q.eta) * q.x / (6.0 * q.k_f));
      v.clock_rate = 0.5;
      v.clock_term = 8.0 * std::exp(-0.5 * std::pow(vs, q.eta) * xv1);
      break;
    }
    case Regime::kRegular: {
      if (!q.alpha_reg || !(*q.alpha_reg > 0.0 && *q.alpha_reg < 1.0)) {
        throw DomainError("regular regime needs alpha_reg in (0, 1)");
      }
      if (!q.slowly_varying || !(*q.slowly_varying > 0.0)) throw DomainError("regular regime needs L(t) > 0");
      if (!q.laplace && !q.clock_rate) throw DomainError("regular regime needs the cycle-length transform");
      const double alpha = *q.alpha_reg;
      const double l = *q.slowly_varying;
      if (!(q.eta > 0.0 && q.eta <= alpha / 2.0)) throw DomainError("eta must lie in (0, alpha/2]");
      const double t0 = regular_threshold(alpha, q.eta, l);
      if (q.t < t0) {
        throw DomainError("regular regime needs t >= t0 = " + std::to_string(t0));
      }
      const double r = 2.0 * q.eta / (2.0 - alpha);
      v.level = std::pow(q.t, alpha / 2.0 + q.eta) * q.x;
      v.gaussian_term = 4.0 * std::exp(-std::pow(q.t, r) * x2x * l / (42.0 * q.b_f));
      v.exponential_term = 4.0 * e * std::exp(-std::pow(q.t, alpha / 2.0 + q.eta) * q.x / (6.0 * q.k_f));
      v.clock_rate = q.clock_rate ? *q.clock_rate : regular_clock_rate(*q.laplace, q.t, alpha, q.eta, l);
      v.clock_term = 8.0 * std::exp(-0.5 * std::pow(q.t, r) * xv1 * v.clock_rate);
      break;
    }
  }
  return finish_bound(v);
}

/// Both sides of mu(g) v*_t - 2 C(g) <= v_t <= C(g) + mu(g) v*_t with slack.
struct SandwichResult {
  bool upper_ok = false;
  bool lower_ok = false;
  double upper_slack = 0.0;  ///< C(g) + mu(g) v*_t - v_t
  double lower_slack = 0.0;  ///< v_t - (mu(g) v*_t - 2 C(g))
  double tolerance = 0.0;    ///< 3 pooled standard errors
  bool passed() const { return upper_ok && lower_ok; }
};

inline SandwichResult vstar_sandwich(stats::Estimate v_t, stats::Estimate vstar_t, double c_g,
                                     double mu_g, double sigmas = 3.0) {
  if (!(v_t.value >= 0.0) || !(vstar_t.value > 0.0) || !(c_g >= 0.0) || !(mu_g > 0.0)) {
    throw DomainError("vstar_sandwich needs nonnegative inputs and mu(g) > 0");
  }
  SandwichResult r;
  r.tolerance = sigmas * std::hypot(v_t.stderr_, mu_g * vstar_t.stderr_);
  r.upper_slack = c_g + mu_g * vstar_t.value - v_t.value;
  r.lower_slack = v_t.value - (mu_g * vstar_t.value - 2.0 * c_g);
  r.upper_ok = r.upper_slack >= -r.tolerance;
  r.lower_ok = r.lower_slack >= -r.tolerance;
  return r;
}

}  // namespace regen
