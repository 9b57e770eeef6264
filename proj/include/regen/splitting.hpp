#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/cycles.hpp"
#include "regen/error.hpp"
#include "regen/models/ctmc.hpp"
#include "regen/observable.hpp"
#include "regen/random.hpp"
#include "regen/resolvent.hpp"

namespace regen {

/// Certificate that U^1(x, .) >= alpha nu(.) for every x in the small set C.
struct MinorizationCert {
  std::vector<std::size_t> small_set;
  std::vector<char> in_set;  ///< membership indicator over all states
  double alpha = 0.0;
  Eigen::VectorXd nu;

  bool contains(std::size_t x) const { return in_set[x] != 0; }
};

/// Largest slack violation min_{x in C, y} (u1[x][y] - alpha nu[y]); >= -1e-14 for a sound certificate.
inline double certificate_slack(const MinorizationCert& cert, const ResolventKernel& kernel) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t x : cert.small_set) {
    for (std::size_t y = 0; y < kernel.states; ++y) {
      worst = std::min(worst, kernel(x, y) - cert.alpha * cert.nu[static_cast<Eigen::Index>(y)]);
    }
  }
  return worst;
}

/// Exhaustive check of the certificate invariants; throws CertificateError.
inline void verify_certificate(const MinorizationCert& cert, const ResolventKernel& kernel) {
  if (cert.small_set.empty()) throw CertificateError("small set is empty");
  if (!(cert.alpha > 0.0 && cert.alpha < 1.0)) throw CertificateError("alpha must lie in (0, 1)");
  if (static_cast<std::size_t>(cert.nu.size()) != kernel.states ||
      cert.in_set.size() != kernel.states) {
    throw CertificateError("certificate size does not match the kernel");
  }
  if (std::abs(cert.nu.sum() - 1.0) > 1e-12) throw CertificateError("nu does not sum to 1");
  for (std::size_t y = 0; y < kernel.states; ++y) {
    const double w = cert.nu[static_cast<Eigen::Index>(y)];
    if (cert.contains(y) ? !(w > 0.0) : w != 0.0) {
      throw CertificateError("nu must be positive exactly on the small set");
    }
  }
  if (certificate_slack(cert, kernel) < -1e-14) {
    throw CertificateError("minorization inequality violated");
  }
}

/// Columnwise-minimum certificate: nu(y) proportional to min_{x in C} u1[x][y] on C.
inline MinorizationCert compute_minorization(const ResolventKernel& kernel,
                                             std::vector<std::size_t> small_set) {
  if (small_set.empty()) throw CertificateError("small set is empty");
  std::sort(small_set.begin(), small_set.end());
  if (std::adjacent_find(small_set.begin(), small_set.end()) != small_set.end()) {
    throw CertificateError("small set has repeated states");
  }
  if (small_set.back() >= kernel.states) throw CertificateError("small-set state out of range");
  MinorizationCert cert;
  cert.small_set = small_set;
  cert.in_set.assign(kernel.states, 0);
  for (std::size_t x : small_set) cert.in_set[x] = 1;
  cert.nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kernel.states));
  for (std::size_t y : small_set) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t x : small_set) m = std::min(m, kernel(x, y));
    cert.nu[static_cast<Eigen::Index>(y)] = m;
  }
  cert.alpha = cert.nu.sum();
  if (!(cert.alpha > 0.0)) throw CertificateError("degenerate small set: alpha = 0");
  if (!(cert.alpha < 1.0)) throw CertificateError("alpha >= 1");
  cert.nu /= cert.alpha;
  for (std::size_t y : small_set) {
    if (!(cert.nu[static_cast<Eigen::Index>(y)] > 0.0)) {
      throw CertificateError("degenerate small set: nu vanishes at state " + std::to_string(y));
    }
  }
  verify_certificate(cert, kernel);
  return cert;
}

/// Split position (Z^1, Z^2, Z^3).
struct SplitState {
  std::size_t z1 = 0;
  double z2 = 1.0;
  std::size_t z3 = 0;

  bool in_atom(const MinorizationCert& cert) const { return cert.contains(z1) && z2 <= cert.alpha; }
};

/// Kernel Q((z1, z2), .): nu on the atom, the residual kernel on the rest of C,
/// U^1(z1, .) off C.
inline Eigen::VectorXd kernel_q(const MinorizationCert& cert, const ResolventKernel& kernel,
                                std::size_t z1, double z2) {
  if (!(z2 >= 0.0 && z2 <= 1.0)) throw DomainError("kernel_q: z2 must lie in [0, 1]");
  if (z1 >= kernel.states) throw DomainError("kernel_q: state out of range");
  const Eigen::VectorXd row = kernel.u1.row(static_cast<Eigen::Index>(z1)).transpose();
  if (!cert.contains(z1)) return row;
  if (z2 <= cert.alpha) return cert.nu;
  Eigen::VectorXd out = (row - cert.alpha * cert.nu) / (1.0 - cert.alpha);
  for (Eigen::Index y = 0; y < out.size(); ++y) {
    if (out[y] < 0.0) {
      if (out[y] < -1e-12) throw CertificateError("residual kernel has a negative weight");
      out[y] = 0.0;
    }
  }
  return out;
}

/// Index drawn from unnormalized nonnegative weights.
inline std::size_t sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& weights, Stream& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw NumericError("categorical weights sum to zero");
  double target = rng.uniform() * total;
  const auto n = weights.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    target -= weights[i];
    if (target < 0.0) return static_cast<std::size_t>(i);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (weights[i] > 0.0) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(n - 1);
}

/// Sampler for the jump-time law with density e^{-t} p_t(x, x3) / u1(x, x3).
///
/// The distribution function is tabulated on a uniform grid from the exact
/// identity int_0^t e^{-s} P_s ds = U^1 (I - e^{-t} P_t) and inverted by quintic
/// Hermite interpolation. Tables are built once per target state x3 on first
/// use and are read-only afterwards.
class JumpTimeSampler {
 public:
  static constexpr double kTailMass = 1e-10;

  JumpTimeSampler(const CtmcModel& model, const ResolventKernel& kernel)
      : kernel_(kernel),
        n_(model.size()),
        step_(std::min(0.01, 0.02 / std::max(model.max_exit_rate(), 1e-300))),
        generator_(model.generator()),
        propagator_(transition_matrix(model, step_)),
        columns_(model.size()),
        once_(std::make_unique<std::once_flag[]>(model.size())) {}

  double step() const { return step_; }

  /// Tabulated distribution function at time t.
  double cdf(std::size_t x, std::size_t x3, double t) const {
    check_pair(x, x3);
    if (t <= 0.0) return 0.0;
    const Column& col = column(x3);
    const std::size_t len = col.length[x];
    const double pos = t / step_;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= len) return col.cdf[x * col.nodes + len - 1];
    return hermite(col, x, k, pos - static_cast<double>(k));
  }

  double sample(std::size_t x, std::size_t x3, Stream& rng) const {
    check_pair(x, x3);
    const Column& col = column(x3);
    const double u = rng.uniform();
    const std::size_t len = col.length[x];
    const double* f = &col.cdf[x * col.nodes];
    if (u >= f[len - 1]) return static_cast<double>(len - 1) * step_ + rng.exponential();
    const auto it = std::upper_bound(f, f + len, u);
    const auto k = static_cast<std::size_t>(it - f) - 1;
    // safeguarded Newton on the interpolant, bracketed in [0, 1]
    double lo = 0.0, hi = 1.0;
    double s = (u - f[k]) / (f[k + 1] - f[k]);
    for (int iter = 0; iter < 30; ++iter) {
      const double g = hermite(col, x, k, s) - u;
      if (g > 0.0) hi = s; else lo = s;
      const double d = hermite_slope(col, x, k, s);
      double next = d > 0.0 ? s - g / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) < 1e-13) {
        s = next;
        break;
      }
      s = next;
    }
    const double t = (static_cast<double>(k) + s) * step_;
    return t > 0.0 ? t : 0.5 * step_ * 1e-12;
  }

 private:
  struct Column {
    std::size_t nodes = 0;
    std::vector<std::size_t> length;  ///< nodes used per start state
    std::vector<double> cdf;          ///< [x * nodes + k]
    std::vector<double> pdf;          ///< density at the nodes
    std::vector<double> slope;        ///< derivative of the density at the nodes
  };

  void check_pair(std::size_t x, std::size_t x3) const {
    if (x >= n_ || x3 >= n_) throw DomainError("jump-time sampler: state out of range");
    if (!(kernel_(x, x3) > 0.0)) {
      throw CertificateError("unreachable pair: u1(" + std::to_string(x) + ", " +
                             std::to_string(x3) + ") = 0");
    }
  }

  // quintic Hermite interpolation of the distribution function on node cell k,
  // matching value, density and density slope at both ends
  double hermite(const Column& col, std::size_t x, std::size_t k, double s) const {
    const std::size_t i = x * col.nodes + k;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h = step_;
    return col.cdf[i] * (1 - 10 * s3 + 15 * s4 - 6 * s5) +
           col.cdf[i + 1] * (10 * s3 - 15 * s4 + 6 * s5) +
           h * col.pdf[i] * (s - 6 * s3 + 8 * s4 - 3 * s5) +
           h * col.pdf[i + 1] * (-4 * s3 + 7 * s4 - 3 * s5) +
           0.5 * h * h * col.slope[i] * (s2 - 3 * s3 + 3 * s4 - s5) +
           0.5 * h * h * col.slope[i + 1] * (s3 - 2 * s4 + s5);
  }

  double hermite_slope(const Column& col, std::size_t x, std::size_t k, double s) const {
    const std::size_t i = x * col.nodes + k;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    const double h = step_;
    return col.cdf[i] * (-30 * s2 + 60 * s3 - 30 * s4) +
           col.cdf[i + 1] * (30 * s2 - 60 * s3 + 30 * s4) +
           h * col.pdf[i] * (1 - 18 * s2 + 32 * s3 - 15 * s4) +
           h * col.pdf[i + 1] * (-12 * s2 + 28 * s3 - 15 * s4) +
           0.5 * h * h * col.slope[i] * (2 * s - 9 * s2 + 12 * s3 - 5 * s4) +
           0.5 * h * h * col.slope[i + 1] * (3 * s2 - 8 * s3 + 5 * s4);
  }

  const Column& column(std::size_t x3) const {
    std::call_once(once_[x3], [&] { columns_[x3] = build_column(x3); });
    return columns_[x3];
  }

  Column build_column(std::size_t x3) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const auto j = static_cast<Eigen::Index>(x3);
    std::vector<std::vector<double>> cdf(n_), pdf(n_), slope(n_);
    std::vector<char> done(n_, 0);
    std::size_t remaining = n_;
    Eigen::VectorXd q = Eigen::VectorXd::Unit(n, j);  // P_t e_{x3}
    constexpr std::size_t kMaxNodes = 20'000'000;
    for (std::size_t k = 0; remaining > 0; ++k) {
      if (k * n_ > kMaxNodes) throw NumericError("jump-time table does not converge");
      const double t = static_cast<double>(k) * step_;
      const double decay = std::exp(-t);
      const Eigen::VectorXd w = kernel_.u1 * q;
      const Eigen::VectorXd gq = generator_ * q;
      for (Eigen::Index x = 0; x < n; ++x) {
        if (done[x]) continue;
        const double norm = kernel_.u1(x, j);
        if (!(norm > 0.0)) {
          done[x] = 1;
          --remaining;
          continue;
        }
        double f = k == 0 ? 0.0 : (norm - decay * w[x]) / norm;
        f = std::clamp(f, cdf[x].empty() ? 0.0 : cdf[x].back(), 1.0);
        cdf[x].push_back(f);
        pdf[x].push_back(decay * q[x] / norm);
        slope[x].push_back(decay * (gq[x] - q[x]) / norm);
        if (f > 1.0 - kTailMass) {
          done[x] = 1;
          --remaining;
        }
      }
      q = propagator_ * q;
    }
    Column col;
    for (const auto& c : cdf) col.nodes = std::max(col.nodes, c.size());
    col.length.resize(n_);
    col.cdf.assign(n_ * col.nodes, 1.0);
    col.pdf.assign(n_ * col.nodes, 0.0);
    col.slope.assign(n_ * col.nodes, 0.0);
    for (std::size_t x = 0; x < n_; ++x) {
      col.length[x] = std::max<std::size_t>(cdf[x].size(), 1);
      std::copy(cdf[x].begin(), cdf[x].end(), col.cdf.begin() + static_cast<std::ptrdiff_t>(x * col.nodes));
      std::copy(pdf[x].begin(), pdf[x].end(), col.pdf.begin() + static_cast<std::ptrdiff_t>(x * col.nodes));
      std::copy(slope[x].begin(), slope[x].end(),
                col.slope.begin() + static_cast<std::ptrdiff_t>(x * col.nodes));
    }
    return col;
  }

  const ResolventKernel& kernel_;
  std::size_t n_;
  double step_;
  Eigen::MatrixXd generator_;
  Eigen::MatrixXd propagator_;
  mutable std::vector<Column> columns_;
  mutable std::unique_ptr<std::once_flag[]> once_;
};

/// One draw from the jump-time law (builds a throwaway table; reuse a
/// JumpTimeSampler for repeated draws).
inline double sample_jump_time(const ResolventKernel& kernel, const CtmcModel& model,
                               std::size_t x, std::size_t x3, Stream& rng) {
  return JumpTimeSampler(model, kernel).sample(x, x3, rng);
}

/// Bridge state at time s of a path from x (time 0) to x3 (time `total`):
/// weight p_s(x, y) p_{total-s}(y, x3) / p_total(x, x3).
inline std::size_t sample_bridge_state(const CtmcModel& model, std::size_t x, std::size_t x3,
                                       double total, double s, Stream& rng) {
  if (!(s > 0.0 && s < total)) throw DomainError("bridge time must satisfy 0 < s < total");
  if (x >= model.size() || x3 >= model.size()) throw DomainError("bridge state out of range");
  const auto n = static_cast<Eigen::Index>(model.size());
  const Eigen::MatrixXd head = transition_matrix(model, s);
  const Eigen::MatrixXd tail = transition_matrix(model, total - s);
  const double norm = transition_matrix(model, total)(static_cast<Eigen::Index>(x),
                                                      static_cast<Eigen::Index>(x3));
  if (!(norm > 0.0)) throw NumericError("bridge endpoint has zero density");
  Eigen::VectorXd w(n);
  for (Eigen::Index y = 0; y < n; ++y) {
    w[y] = head(static_cast<Eigen::Index>(x), y) * tail(y, static_cast<Eigen::Index>(x3)) / norm;
  }
  return sample_categorical(w, rng);
}

struct SplitOptions {
  std::size_t bridge_points = 32;  ///< observation grid intervals per clock interval
  bool keep_clock_times = false;
  bool keep_coins = false;
};

/// Values of each observable at each state, laid out [state * k + j].
inline std::vector<double> observable_table(std::span<const StateObservable> observables,
                                            std::size_t n_states) {
  std::vector<double> table(n_states * observables.size());
  for (std::size_t j = 0; j < observables.size(); ++j) {
    if (static_cast<std::size_t>(observables[j].values.size()) != n_states) {
      throw DomainError("observable '" + observables[j].name + "' has the wrong length");
    }
    for (std::size_t x = 0; x < n_states; ++x) table[x * observables.size() + j] = observables[j](x);
  }
  return table;
}

inline std::vector<std::string> observable_names(std::span<const StateObservable> observables) {
  std::vector<std::string> names;
  for (const auto& f : observables) names.push_back(f.name);
  return names;
}

/// Split chain of a finite CTMC for a fixed certificate. Holds the resolvent
/// and the jump-time tables; safe to share across threads once built.
class SplitChain {
 public:
  SplitChain(const CtmcModel& model, MinorizationCert cert)
      : model_(model), kernel_(resolvent_kernel(model)), cert_(std::move(cert)), jumps_(model_, kernel_) {
    verify_certificate(cert_, kernel_);
  }

  SplitChain(const CtmcModel& model, std::vector<std::size_t> small_set)
      : SplitChain(model, compute_minorization(resolvent_kernel(model), std::move(small_set))) {}

  SplitChain(const SplitChain&) = delete;
  SplitChain& operator=(const SplitChain&) = delete;

  const CtmcModel& model() const { return model_; }
  const ResolventKernel& kernel() const { return kernel_; }
  const MinorizationCert& cert() const { return cert_; }
  const JumpTimeSampler& jump_sampler() const { return jumps_; }

  /// Z_0 = (x0, U, Q((x0, U), .)).
  SplitState initial_state(std::size_t x0, Stream& rng) const {
    if (x0 >= model_.size()) throw DomainError("initial state out of range");
    SplitState z{x0, rng.uniform(), 0};
    z.z3 = sample_categorical(kernel_q(cert_, kernel_, z.z1, z.z2), rng);
    return z;
  }

  /// Coin probability alpha nu(y) / u1(x, y) for a clock interval x -> y with x in C.
  double coin_probability(std::size_t x, std::size_t y) const {
    const double p = cert_.alpha * cert_.nu[static_cast<Eigen::Index>(y)] / kernel_(x, y);
    if (p > 1.0 + 1e-12) throw CertificateError("coin probability exceeds 1");
    return std::min(p, 1.0);
  }

  /// Four-step construction: exponential-clock jump times with the exact
  /// jump-time law, bridge fill of Z^1 on an observation grid, and renewal of
  /// (Z^1, Z^2, Z^3) at every jump time. Regeneration happens at the jump time
  /// following a visit of the atom at a jump time strictly after the previous
  /// regeneration.
  RegenerationStream forward(SplitState z, std::size_t n_cycles,
                             std::span<const StateObservable> observables, Stream& rng,
                             const SplitOptions& opt = {}) const {
    if (n_cycles < 2) throw DomainError("n_cycles must be >= 2");
    if (opt.bridge_points < 1) throw DomainError("bridge_points must be >= 1");
    if (z.z1 >= model_.size() || z.z3 >= model_.size() || !(z.z2 >= 0.0 && z.z2 <= 1.0)) {
      throw DomainError("invalid initial split state");
    }
    const std::size_t k = observables.size();
    const auto table = observable_table(observables, model_.size());
    const auto n = static_cast<Eigen::Index>(model_.size());
    const std::size_t grid = opt.bridge_points;

    std::vector<RegenerationRecord> cycles;
    cycles.reserve(n_cycles);
    std::vector<double> clock_times;
    std::vector<double> coins;
    RegenerationRecord current;
    current.xi.assign(k, 0.0);
    current.start_state = z.z1;
    double now = 0.0;
    bool atom_pending = false;  // atom visited since the last regeneration
    std::vector<Eigen::VectorXd> q(grid + 1);
    std::vector<std::size_t> path(grid + 1);

    while (cycles.size() < n_cycles) {
      // step 1: next clock interval
      const double sigma = jumps_.sample(z.z1, z.z3, rng);
      // step 3: bridge of Z^1 from z1 to z3 over [0, sigma]
      const double h = sigma / static_cast<double>(grid);
      const Eigen::MatrixXd ph = transition_matrix(model_, h);
      q[grid] = Eigen::VectorXd::Unit(n, static_cast<Eigen::Index>(z.z3));
      for (std::size_t g = grid; g-- > 0;) q[g] = ph * q[g + 1];
      path[0] = z.z1;
      for (std::size_t g = 1; g < grid; ++g) {
        const auto prev = static_cast<Eigen::Index>(path[g - 1]);
        Eigen::VectorXd w = ph.row(prev).transpose().cwiseProduct(q[g]);
        path[g] = sample_categorical(w, rng);
      }
      path[grid] = z.z3;
      for (std::size_t g = 0; g < grid; ++g) {
        for (std::size_t j = 0; j < k; ++j) {
          current.xi[j] += 0.5 * h * (table[path[g] * k + j] + table[path[g + 1] * k + j]);
        }
      }
      now += sigma;
      current.duration += sigma;
      ++current.clock_ticks;
      // step 4: renewal at the jump time
      z.z1 = z.z3;
      z.z2 = rng.uniform();
      z.z3 = sample_categorical(kernel_q(cert_, kernel_, z.z1, z.z2), rng);
      if (opt.keep_clock_times) clock_times.push_back(now);
      if (opt.keep_coins) coins.push_back(z.z2);

      if (atom_pending) {
        // this jump time is R_{n+1}
        current.index = cycles.size() + 1;
        cycles.push_back(std::move(current));
        current = RegenerationRecord{};
        current.xi.assign(k, 0.0);
        current.start_state = z.z1;
        atom_pending = false;
        continue;  // the tick at R_{n+1} itself is not a candidate
      }
      atom_pending = z.in_atom(cert_);
    }
    auto stream = make_stream(std::move(cycles), observable_names(observables));
    stream.clock_times = std::move(clock_times);
    stream.coins = std::move(coins);
    return stream;
  }

  /// Retrospective coins: the CTMC runs with an independent unit-rate clock;
  /// after a clock interval from x in C to y, the interval's start is an atom
  /// visit with probability alpha nu(y) / u1(x, y), and then the end of the
  /// interval is a regeneration time. Path integrals are exact.
  RegenerationStream retrospective(std::size_t x0, std::size_t n_cycles,
                                   std::span<const StateObservable> observables, Stream& rng,
                                   const SplitOptions& opt = {}) const {
    if (n_cycles < 2) throw DomainError("n_cycles must be >= 2");
    std::vector<RegenerationRecord> cycles;
    cycles.reserve(n_cycles);
    std::vector<double> clock_times;
    retrospective_run(x0, observables, rng, opt.keep_clock_times ? &clock_times : nullptr,
                      [&](RegenerationRecord&& rec) {
                        cycles.push_back(std::move(rec));
                        return cycles.size() < n_cycles;
                      });
    auto stream = make_stream(std::move(cycles), observable_names(observables));
    stream.clock_times = std::move(clock_times);
    return stream;
  }

  /// Retrospective cycles from x0 until their total length reaches `horizon`
  /// (the last cycle straddles it).
  std::vector<RegenerationRecord> retrospective_until(std::size_t x0, double horizon,
                                                      std::span<const StateObservable> observables,
                                                      Stream& rng) const {
    std::vector<RegenerationRecord> cycles;
    double total = 0.0;
    retrospective_run(x0, observables, rng, nullptr, [&](RegenerationRecord&& rec) {
      total += rec.duration;
      cycles.push_back(std::move(rec));
      return total <= horizon;
    });
    return cycles;
  }

  /// First cycle [0, R_1] from x0: returns the integrals of the observables.
  RegenerationRecord first_cycle(std::size_t x0, std::span<const StateObservable> observables,
                                 Stream& rng) const {
    RegenerationRecord out;
    retrospective_run(x0, observables, rng, nullptr, [&](RegenerationRecord&& rec) {
      out = std::move(rec);
      return false;
    });
    return out;
  }

 private:
  template <class Sink>
  void retrospective_run(std::size_t x0, std::span<const StateObservable> observables, Stream& rng,
                         std::vector<double>* clock_times, Sink&& sink) const {
    if (x0 >= model_.size()) throw DomainError("initial state out of range");
    const std::size_t k = observables.size();
    const auto table = observable_table(observables, model_.size());
    RegenerationRecord current;
    current.xi.assign(k, 0.0);
    current.start_state = x0;
    std::size_t x = x0;
    double now = 0.0;
    bool candidate = false;  // the tick at R_n is not a candidate
    std::size_t index = 0;
    for (;;) {
      const double sigma = rng.exponential();
      const std::size_t y = advance_ctmc(model_, x, sigma, rng, [&](std::size_t s, double dt) {
        for (std::size_t j = 0; j < k; ++j) current.xi[j] += table[s * k + j] * dt;
      });
      now += sigma;
      current.duration += sigma;
      ++current.clock_ticks;
      if (clock_times) clock_times->push_back(now);
      const bool regenerate = candidate && cert_.contains(x) && rng.uniform() < coin_probability(x, y);
      x = y;
      candidate = true;
      if (regenerate) {
        current.index = ++index;
        candidate = false;
        RegenerationRecord next;
        next.xi.assign(k, 0.0);
        next.start_state = y;
        std::swap(next, current);
        if (!sink(std::move(next))) return;
      }
    }
  }

  const CtmcModel& model_;
  ResolventKernel kernel_;
  MinorizationCert cert_;
  JumpTimeSampler jumps_;
};

inline RegenerationStream forward_split_chain(const CtmcModel& model, const MinorizationCert& cert,
                                              SplitState z0, std::size_t n_cycles,
                                              std::span<const StateObservable> observables,
                                              Stream& rng, const SplitOptions& opt = {}) {
  return SplitChain(model, cert).forward(z0, n_cycles, observables, rng, opt);
}

inline RegenerationStream retrospective_regeneration(const CtmcModel& model,
                                                     const MinorizationCert& cert, std::size_t x0,
                                                     std::size_t n_cycles,
                                                     std::span<const StateObservable> observables,
                                                     Stream& rng, const SplitOptions& opt = {}) {
  return SplitChain(model, cert).retrospective(x0, n_cycles, observables, rng, opt);
}

}  // namespace regen
