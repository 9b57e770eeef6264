#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "regen/error.hpp"
#include "regen/models/ctmc.hpp"

namespace regen {

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant (Higham 2005).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DomainError("expm needs a square matrix");
  const Eigen::Index n = a.rows();
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  const Eigen::MatrixXd s = a / std::ldexp(1.0, squarings);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd s2 = s * s;
  const Eigen::MatrixXd s4 = s2 * s2;
  const Eigen::MatrixXd s6 = s4 * s2;
  const Eigen::MatrixXd u_inner = b[13] * s6 + b[11] * s4 + b[9] * s2;
  const Eigen::MatrixXd u = s * (s6 * u_inner + b[7] * s6 + b[5] * s4 + b[3] * s2 + b[1] * id);
  const Eigen::MatrixXd v_inner = b[12] * s6 + b[10] * s4 + b[8] * s2;
  const Eigen::MatrixXd v = s6 * v_inner + b[6] * s6 + b[4] * s4 + b[2] * s2 + b[0] * id;
  Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

/// P_t = exp(t G).
inline Eigen::MatrixXd transition_matrix(const CtmcModel& model, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("transition_matrix: t must be >= 0");
  if (t == 0.0) return Eigen::MatrixXd::Identity(model.size(), model.size());
  return expm(t * model.generator());
}

/// Resolvent U^1 = int_0^inf e^{-t} P_t dt = (I - G)^{-1}.
struct ResolventKernel {
  Eigen::MatrixXd u1;
  std::size_t states = 0;

  double operator()(std::size_t x, std::size_t y) const {
    return u1(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
};

inline ResolventKernel resolvent_kernel(const CtmcModel& model) {
  const auto n = static_cast<Eigen::Index>(model.size());
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - model.generator();
  const auto lu = m.fullPivLu();
  if (!lu.isInvertible()) throw NumericError("I - G is singular");
  ResolventKernel k{lu.inverse(), model.size()};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(k.u1.row(i).sum() - 1.0) > 1e-10) {
      throw NumericError("resolvent row " + std::to_string(i) + " does not sum to 1");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (k.u1(i, j) < 0.0) {
        if (k.u1(i, j) < -1e-14) throw NumericError("resolvent has a negative entry");
        k.u1(i, j) = 0.0;
      }
    }
  }
  return k;
}

enum class Normalization { kProbability, kCycle };

/// Invariant measure: left null vector of the generator.
struct StationaryMeasure {
  Eigen::VectorXd weights;
  Normalization normalization = Normalization::kProbability;

  double operator[](std::size_t x) const { return weights[static_cast<Eigen::Index>(x)]; }
  double total() const { return weights.sum(); }

  /// Same measure rescaled to total mass `mass` (the mean cycle length for the
  /// cycle normalization).
  StationaryMeasure rescaled(double mass, Normalization tag) const {
    return {weights * (mass / total()), tag};
  }
};

inline StationaryMeasure stationary_measure(const CtmcModel& model) {
  const auto n = static_cast<Eigen::Index>(model.size());
  // replace one balance equation by the normalization sum = 1
  Eigen::MatrixXd a = model.generator().transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::VectorXd w = a.fullPivLu().solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w[i] < 0.0) {
      if (w[i] < -1e-12) throw NumericError("stationary measure has a negative entry");
      w[i] = 0.0;
    }
  }
  w /= w.sum();
  if ((w.transpose() * model.generator()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, model.max_exit_rate())) {
    throw NumericError("stationary measure fails the balance equations");
  }
  return {std::move(w), Normalization::kProbability};
}

}  // namespace regen
