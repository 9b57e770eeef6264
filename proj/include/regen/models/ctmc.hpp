#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/error.hpp"
#include "regen/random.hpp"

namespace regen {

/// Finite-state continuous-time Markov process given by its generator.
///
/// The reference measure is counting measure, so transition densities are
/// plain matrix-exponential entries. Immutable after construction.
class CtmcModel {
 public:
  CtmcModel(std::vector<std::string> labels, Eigen::MatrixXd generator)
      : labels_(std::move(labels)), generator_(std::move(generator)) {
    validate();
    build_jump_tables();
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Eigen::MatrixXd& generator() const { return generator_; }

  /// Counting-measure weights (one per state).
  Eigen::VectorXd reference_measure() const { return Eigen::VectorXd::Ones(size()); }

  double exit_rate(std::size_t x) const { return -generator_(x, x); }
  double max_exit_rate() const { return max_exit_rate_; }

  std::size_t index_of(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw ModelError("unknown state label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  /// Successor of `x` in the embedded jump chain, driven by a uniform `u`.
  std::size_t jump_target(std::size_t x, double u) const {
    const auto& table = jumps_[x];
    const auto it = std::upper_bound(table.cumulative.begin(), table.cumulative.end(), u);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - table.cumulative.begin()),
                                         table.targets.size() - 1);
    return table.targets[k];
  }

 private:
  struct JumpTable {
    std::vector<std::size_t> targets;
    std::vector<double> cumulative;
  };

  void validate() const {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    if (n < 2) throw ModelError("a CTMC needs at least 2 states");
    if (generator_.rows() != n || generator_.cols() != n) {
      throw ModelError("generator must be square with one row per state label");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double row_sum = 0.0;
      double scale = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double q = generator_(i, j);
        if (!std::isfinite(q)) throw ModelError("generator has a non-finite entry");
        if (i != j && q < 0.0) {
          throw ModelError("negative off-diagonal rate in row " + std::to_string(i));
        }
        row_sum += q;
        scale = std::max(scale, std::abs(q));
      }
      if (std::abs(row_sum) > 1e-12 * scale) {
        throw ModelError("generator row " + std::to_string(i) + " does not sum to zero");
      }
    }
    if (!reaches_all(false) || !reaches_all(true)) {
      throw ModelError("generator is not irreducible");
    }
  }

  bool reaches_all(bool reversed) const {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    std::vector<char> seen(labels_.size(), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double q = reversed ? generator_(j, i) : generator_(i, j);
        if (j != i && q > 0.0 && !seen[j]) {
          seen[j] = 1;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == labels_.size();
  }

  void build_jump_tables() {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    jumps_.resize(labels_.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rate = -generator_(i, i);
      max_exit_rate_ = std::max(max_exit_rate_, rate);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || generator_(i, j) <= 0.0) continue;
        acc += generator_(i, j) / rate;
        jumps_[i].targets.push_back(static_cast<std::size_t>(j));
        jumps_[i].cumulative.push_back(acc);
      }
      jumps_[i].cumulative.back() = 1.0;
    }
  }

  std::vector<std::string> labels_;
  Eigen::MatrixXd generator_;
  std::vector<JumpTable> jumps_;
  double max_exit_rate_ = 0.0;
};

/// Two-state chain with rates `a` (0 -> 1) and `b` (1 -> 0).
inline CtmcModel build_two_state_ctmc(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ModelError("two-state CTMC needs positive rates a and b");
  Eigen::MatrixXd g(2, 2);
  g << -a, a, b, -b;
  return CtmcModel({"0", "1"}, std::move(g));
}

/// Piecewise-constant trajectory: `values[k]` holds on [times[k], times[k+1]).
template <class Value>
struct PathSegment {
  std::vector<double> times;
  std::vector<Value> values;
  double horizon = 0.0;
};

/// Advances the chain from `x` for `duration` time units by exact event-driven
/// simulation, calling `on_hold(state, dt)` for every holding interval.
/// Returns the state at the end of the interval.
template <class OnHold>
std::size_t advance_ctmc(const CtmcModel& model, std::size_t x, double duration, Stream& rng,
                         OnHold&& on_hold) {
  double remaining = duration;
  for (;;) {
    const double hold = rng.exponential(model.exit_rate(x));
    if (hold >= remaining) {
      on_hold(x, remaining);
      return x;
    }
    on_hold(x, hold);
    remaining -= hold;
    x = model.jump_target(x, rng.uniform());
  }
}

inline PathSegment<std::size_t> simulate_ctmc_path(const CtmcModel& model, std::size_t x0,
                                                    double horizon, Stream& rng) {
  if (x0 >= model.size()) throw DomainError("initial state out of range");
  if (!(horizon >= 0.0)) throw DomainError("horizon must be >= 0");
  PathSegment<std::size_t> path;
  path.horizon = horizon;
  path.times.push_back(0.0);
  path.values.push_back(x0);
  double t = 0.0;
  std::size_t x = x0;
  for (;;) {
    t += rng.exponential(model.exit_rate(x));
    if (t >= horizon) break;
    x = model.jump_target(x, rng.uniform());
    path.times.push_back(t);
    path.values.push_back(x);
  }
  return path;
}

}  // namespace regen
