#pragma once

#include <cstddef>
#include <cstdlib>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/error.hpp"
#include "regen/models/ctmc.hpp"

namespace regen {

/// Lattice site: integer coordinates in Z^d.
using Site = std::vector<int>;

/// Flip rate c_i(eta) of site `i` in configuration `eta` (entries +1 / -1).
using FlipRate = std::function<double(std::size_t i, std::span<const int> eta)>;

inline constexpr std::size_t kMaxSpinSites = 12;

/// Interacting spin system on a finite set of sites with bounded flip rates.
struct SpinFlipSpec {
  std::vector<Site> sites;
  FlipRate rate;
  std::vector<double> rate_caps;
};

/// Spins of configuration index `code`: bit i set means site i has spin +1.
inline std::vector<int> decode_spins(std::size_t code, std::size_t n_sites) {
  std::vector<int> eta(n_sites);
  for (std::size_t i = 0; i < n_sites; ++i) eta[i] = ((code >> i) & 1u) ? +1 : -1;
  return eta;
}

inline std::string spin_label(std::span<const int> eta) {
  std::string label;
  label.reserve(eta.size());
  for (int s : eta) label.push_back(s > 0 ? '+' : '-');
  return label;
}

/// Sites at L1 distance one from site `i` within `sites`.
inline std::vector<std::vector<std::size_t>> lattice_neighbours(const std::vector<Site>& sites) {
  std::vector<std::vector<std::size_t>> out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = 0; j < sites.size(); ++j) {
      int dist = 0;
      for (std::size_t k = 0; k < sites[i].size(); ++k) dist += std::abs(sites[i][k] - sites[j][k]);
      if (dist == 1) out[i].push_back(j);
    }
  }
  return out;
}

/// Every site flips at the same constant rate.
inline FlipRate constant_flip_rate(double c) {
  return [c](std::size_t, std::span<const int>) { return c; };
}

/// Site flips at rate `high` when its spin disagrees with the sign of the sum
/// of its lattice neighbours, `low` when it agrees, and their mean on ties.
inline FlipRate majority_flip_rate(const std::vector<Site>& sites, double low, double high) {
  return [nbrs = lattice_neighbours(sites), low, high](std::size_t i, std::span<const int> eta) {
    int field = 0;
    for (std::size_t j : nbrs[i]) field += eta[j];
    if (field == 0) return 0.5 * (low + high);
    return (field > 0) == (eta[i] > 0) ? low : high;
  };
}

/// Compiles a spin-flip system into the CTMC on {-1,+1}^V whose generator has
/// rate c_i(eta) from eta to eta^i (site i flipped) and zero elsewhere.
inline CtmcModel compile_spinflip(const SpinFlipSpec& spec) {
  const std::size_t n_sites = spec.sites.size();
  if (n_sites == 0) throw ModelError("spin-flip system needs at least one site");
  if (n_sites > kMaxSpinSites) {
    throw ModelError("spin-flip system has " + std::to_string(n_sites) + " sites; at most " +
                     std::to_string(kMaxSpinSites) + " are supported");
  }
  if (spec.rate_caps.size() != n_sites) throw ModelError("need one rate cap per site");
  if (!spec.rate) throw ModelError("spin-flip system has no rate function");
  std::set<Site> distinct(spec.sites.begin(), spec.sites.end());
  if (distinct.size() != n_sites) throw ModelError("spin-flip sites must be distinct");
  for (const auto& s : spec.sites) {
    if (s.size() != spec.sites.front().size()) throw ModelError("sites must share one dimension");
  }

  const std::size_t n_states = std::size_t{1} << n_sites;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_states),
                                            static_cast<Eigen::Index>(n_states));
  std::vector<std::string> labels(n_states);
  for (std::size_t code = 0; code < n_states; ++code) {
    const auto eta = decode_spins(code, n_sites);
    labels[code] = spin_label(eta);
    double total = 0.0;
    for (std::size_t i = 0; i < n_sites; ++i) {
      const double c = spec.rate(i, eta);
      if (!(c >= 0.0) || c > spec.rate_caps[i]) {
        throw ModelError("flip rate of site " + std::to_string(i) + " in configuration " +
                         labels[code] + " is outside [0, M_i]");
      }
      g(static_cast<Eigen::Index>(code), static_cast<Eigen::Index>(code ^ (std::size_t{1} << i))) = c;
      total += c;
    }
    g(static_cast<Eigen::Index>(code), static_cast<Eigen::Index>(code)) = -total;
  }
  return CtmcModel(std::move(labels), std::move(g));
}

}  // namespace regen
