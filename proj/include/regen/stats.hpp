#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "regen/error.hpp"

namespace regen::stats {

/// Streaming mean/variance (Welford), mergeable in a fixed order.
class Moments {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const Moments& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    const double total = static_cast<double>(n_ + other.n_);
    const double delta = other.mean_ - mean_;
    mean_ += delta * static_cast<double>(other.n_) / total;
    m2_ += other.m2_ + delta * delta * static_cast<double>(n_) *
                           static_cast<double>(other.n_) / total;
    n_ += other.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_mean() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

inline Estimate mean_estimate(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.add(x);
  return {m.mean(), m.stderr_mean()};
}

/// Sample autocorrelation at `lag` (biased normalisation, as usual).
inline double autocorrelation(std::span<const double> xs, std::size_t lag) {
  const std::size_t n = xs.size();
  if (n <= lag + 1) throw DataError("autocorrelation: series shorter than lag");
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - mean) * (x - mean);
  if (c0 == 0.0) return 0.0;
  double ck = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) ck += (xs[i] - mean) * (xs[i + lag] - mean);
  return ck / c0;
}

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 0.3) {
    // alternating series converges slowly here; use the theta-function form
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int j = 1; j < 50; ++j) {
      const double k = 2.0 * j - 1.0;
      cdf += std::exp(-k * k * pi * pi / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value with Stephens' correction.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/// One-sample KS test against Uniform(0, 1).
inline KsResult ks_uniform(std::vector<double> u) {
  if (u.empty()) throw DataError("ks_uniform: empty sample");
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = std::clamp(u[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness-of-fit test of counts against cell probabilities.
inline ChiSquareResult chi_square_gof(std::span<const double> counts,
                                      std::span<const double> probabilities) {
  if (counts.size() != probabilities.size() || counts.size() < 2) {
    throw DataError("chi_square_gof: need matching count/probability vectors with >= 2 cells");
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expected = total * probabilities[k];
    if (expected <= 0.0) {
      if (counts[k] > 0) return {std::numeric_limits<double>::infinity(), 0, 0.0};
      continue;
    }
    stat += (counts[k] - expected) * (counts[k] - expected) / expected;
    ++cells;
  }
  const std::size_t dof = cells > 1 ? cells - 1 : 1;
  return {stat, dof, boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * stat)};
}

struct BinomialInterval {
  double p_hat = 0.0;
  double low = 0.0;
  double high = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline BinomialInterval clopper_pearson(std::size_t successes, std::size_t trials,
                                        double confidence = 0.99) {
  if (trials == 0) throw DataError("clopper_pearson: zero trials");
  const double alpha = 1.0 - confidence;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  BinomialInterval out;
  out.p_hat = k / n;
  out.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
  out.high = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
  return out;
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Hill estimator of the tail index from the top `k` order statistics.
inline double hill_estimator(std::span<const double> samples, std::size_t k) {
  if (k < 2 || k >= samples.size()) throw DataError("hill_estimator: need 2 <= k < n");
  std::vector<double> top(samples.begin(), samples.end());
  std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(),
                   std::greater<>());
  const double threshold = top[k];
  if (!(threshold > 0.0)) throw DataError("hill_estimator: non-positive order statistic");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(top[i] / threshold);
  return static_cast<double>(k) / sum;
}

}  // namespace regen::stats
