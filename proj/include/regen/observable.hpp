#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/error.hpp"

namespace regen {

/// Bounded observable on the states of a finite chain.
struct StateObservable {
  std::string name;
  Eigen::VectorXd values;
  bool centered = false;

  double operator()(std::size_t x) const { return values[static_cast<Eigen::Index>(x)]; }
  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

  std::vector<std::size_t> support() const {
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (values[i] != 0.0) out.push_back(static_cast<std::size_t>(i));
    }
    return out;
  }

  StateObservable abs() const { return {name + "_abs", values.cwiseAbs(), false}; }

  StateObservable scaled(double c) const { return {name, c * values, centered}; }

  static StateObservable constant(std::string name, std::size_t n, double c) {
    return {std::move(name), Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), c), false};
  }

  static StateObservable indicator(std::string name, std::size_t n,
                                   const std::vector<std::size_t>& states) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s : states) {
      if (s >= n) throw DomainError("indicator state out of range");
      v[static_cast<Eigen::Index>(s)] = 1.0;
    }
    return {std::move(name), std::move(v), false};
  }
};

/// f - pi(f) for a probability vector `pi`; flagged centered.
inline StateObservable centered_observable(const StateObservable& f, const Eigen::VectorXd& pi) {
  if (pi.size() != f.values.size()) throw DomainError("measure and observable sizes differ");
  StateObservable out{f.name, f.values.array() - pi.dot(f.values), true};
  if (std::abs(pi.dot(out.values)) > 1e-12) throw NumericError("centering failed");
  return out;
}

/// Checks the centering invariant |pi(f)| <= 1e-12 for a flagged observable.
inline void validate_centered(const StateObservable& f, const Eigen::VectorXd& pi) {
  if (f.centered && std::abs(pi.dot(f.values)) > 1e-12) {
    throw DomainError("observable '" + f.name + "' is flagged centered but pi(f) != 0");
  }
}

/// Piece of a piecewise-constant function on the line: `value` on [lo, hi).
struct Piece {
  double lo;
  double hi;
  double value;
};

/// Bounded observable on the real line with compact support.
struct LineObservable {
  std::string name;
  std::function<double(double)> eval;
  double sup_norm = 0.0;
  double support_lo = 0.0;
  double support_hi = 0.0;
  bool centered = false;
  /// Set for piecewise-constant observables (enables exact integrals).
  std::vector<Piece> pieces;

  double operator()(double x) const { return eval(x); }

  bool has_support() const { return support_hi > support_lo; }

  /// Integral against Lebesgue measure (piecewise-constant observables only).
  double lebesgue_integral() const {
    if (pieces.empty() && has_support()) {
      throw DomainError("lebesgue_integral needs a piecewise-constant observable");
    }
    double total = 0.0;
    for (const auto& p : pieces) total += p.value * (p.hi - p.lo);
    return total;
  }

  LineObservable abs() const {
    LineObservable out = *this;
    out.name = name + "_abs";
    out.centered = false;
    auto inner = eval;
    out.eval = [inner](double x) { return std::abs(inner(x)); };
    for (auto& p : out.pieces) p.value = std::abs(p.value);
    return out;
  }

  static LineObservable zero(std::string name) {
    LineObservable out;
    out.name = std::move(name);
    out.eval = [](double) { return 0.0; };
    return out;
  }

  static LineObservable piecewise(std::string name, std::vector<Piece> pieces,
                                  bool centered = false) {
    if (pieces.empty()) return zero(std::move(name));
    LineObservable out;
    out.name = std::move(name);
    out.support_lo = std::numeric_limits<double>::infinity();
    out.support_hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : pieces) {
      if (!(p.hi > p.lo) || !std::isfinite(p.lo) || !std::isfinite(p.hi) ||
          !std::isfinite(p.value)) {
        throw DomainError("piecewise observable needs finite pieces with lo < hi");
      }
      out.sup_norm = std::max(out.sup_norm, std::abs(p.value));
      out.support_lo = std::min(out.support_lo, p.lo);
      out.support_hi = std::max(out.support_hi, p.hi);
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    for (std::size_t k = 1; k < pieces.size(); ++k) {
      if (pieces[k].lo < pieces[k - 1].hi) throw DomainError("observable pieces overlap");
    }
    out.pieces = pieces;
    out.eval = [pieces = std::move(pieces)](double x) {
      for (const auto& p : pieces) {
        if (x >= p.lo && x < p.hi) return p.value;
      }
      return 0.0;
    };
    out.centered = centered;
    return out;
  }
};

}  // namespace regen
