#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/document.hpp"
#include "regen/error.hpp"
#include "regen/models/ctmc.hpp"
#include "regen/models/diffusion.hpp"
#include "regen/models/spinflip.hpp"

namespace regen {

/// A model read from a configuration table: either a finite chain with its
/// small set and start state, or a one-dimensional diffusion with its start
/// position.
struct ModelDefinition {
  std::string kind;
  std::optional<CtmcModel> chain;
  std::vector<std::size_t> small_set;
  std::size_t start_state = 0;
  std::optional<Diffusion1D> diffusion;
  double start_position = 0.0;

  bool is_chain() const { return chain.has_value(); }
};

namespace detail {

inline void chain_extras(const ConfigSection& s, ModelDefinition& def) {
  const auto& model = *def.chain;
  try {
    if (s.has("small_set")) {
      for (const auto& label : s.strings("small_set")) def.small_set.push_back(model.index_of(label));
    } else {
      for (std::size_t x = 0; x < model.size(); ++x) def.small_set.push_back(x);
    }
  } catch (const ModelError& e) {
    s.fail("small_set", e.what());
  }
  if (s.has("start_state")) {
    try {
      def.start_state = model.index_of(s.string("start_state"));
    } catch (const ModelError& e) {
      s.fail("start_state", e.what());
    }
  }
}

inline ModelDefinition load_ctmc(const ConfigSection& s) {
  s.allow_only({"kind", "states", "generator", "small_set", "start_state"});
  const auto rows = s.matrix("generator");
  const auto n = rows.size();
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) s.fail("generator", "row " + std::to_string(i) + " has the wrong length");
    for (std::size_t j = 0; j < n; ++j) g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  std::vector<std::string> labels;
  if (s.has("states")) {
    labels = s.strings("states");
    if (labels.size() != n) s.fail("states", "needs one label per generator row");
  } else {
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  }
  ModelDefinition def;
  def.kind = "ctmc";
  try {
    def.chain.emplace(std::move(labels), std::move(g));
  } catch (const ModelError& e) {
    s.fail("generator", e.what());
  }
  chain_extras(s, def);
  return def;
}

inline ModelDefinition load_spinflip(const ConfigSection& s) {
  s.allow_only({"kind", "sites", "line", "rate", "small_set", "start_state"});
  SpinFlipSpec spec;
  if (s.has("sites")) {
    for (const auto& row : s.matrix("sites")) {
      Site site;
      for (double c : row) {
        if (c != std::round(c)) s.fail("sites", "coordinates must be integers");
        site.push_back(static_cast<int>(c));
      }
      spec.sites.push_back(std::move(site));
    }
  } else if (s.has("line")) {
    const auto n = s.unsigned_integer("line");
    for (std::uint64_t i = 0; i < n; ++i) spec.sites.push_back({static_cast<int>(i)});
  } else {
    s.fail("", "spinflip needs 'sites' or 'line'");
  }
  const auto rate = s.section("rate");
  const auto rule = rate.string("kind");
  if (rule == "constant") {
    rate.allow_only({"kind", "value"});
    const double c = rate.positive("value");
    spec.rate = constant_flip_rate(c);
    spec.rate_caps.assign(spec.sites.size(), c);
  } else if (rule == "majority") {
    rate.allow_only({"kind", "low", "high"});
    const double low = rate.positive("low");
    const double high = rate.positive("high");
    spec.rate = majority_flip_rate(spec.sites, low, high);
    spec.rate_caps.assign(spec.sites.size(), std::max(low, high));
  } else {
    rate.fail("kind", "unknown rate rule '" + rule + "' (constant, majority)");
  }
  ModelDefinition def;
  def.kind = "spinflip";
  try {
    def.chain.emplace(compile_spinflip(spec));
  } catch (const ModelError& e) {
    s.fail("", e.what());
  }
  chain_extras(s, def);
  return def;
}

inline CrossingRule parse_crossing(const ConfigSection& s) {
  const auto rule = s.string_or("crossing", "sign_change");
  if (rule == "sign_change") return CrossingRule::kSignChange;
  if (rule == "brownian_bridge") return CrossingRule::kBrownianBridge;
  s.fail("crossing", "unknown crossing rule '" + rule + "' (sign_change, brownian_bridge)");
}

inline ModelDefinition load_diffusion(const ConfigSection& s, const std::string& kind) {
  s.allow_only({"kind", "process", "theta", "sigma", "level_a", "level_b", "step", "crossing",
                "max_cycle_duration", "start"});
  const double sigma = s.positive_or("sigma", 1.0);
  const double a = s.number_or("level_a", 0.0);
  const double b = s.number_or("level_b", 1.0);
  const double step = s.positive_or("step", 1e-4);
  const auto process = kind == "bm" ? std::string("brownian") : s.string_or("process", "brownian");
  ModelDefinition def;
  def.kind = kind;
  try {
    if (process == "brownian") {
      if (kind == "bm" && s.has("process")) s.fail("process", "not used by kind 'bm'");
      def.diffusion = make_brownian(sigma, a, b, step);
    } else if (process == "ou") {
      def.diffusion = make_ornstein_uhlenbeck(s.positive_or("theta", 1.0), sigma, a, b, step);
    } else {
      s.fail("process", "unknown process '" + process + "' (brownian, ou)");
    }
    def.diffusion->crossing = parse_crossing(s);
    if (s.has("max_cycle_duration")) def.diffusion->max_cycle_duration = s.positive("max_cycle_duration");
    def.diffusion->validate();
  } catch (const ModelError& e) {
    s.fail("", e.what());
  }
  def.start_position = s.number_or("start", a);
  return def;
}

}  // namespace detail

/// Model from a table with `kind` in {ctmc, spinflip, diffusion1d, bm}.
inline ModelDefinition load_model(const ConfigSection& s) {
  const auto kind = s.string("kind");
  if (kind == "ctmc") return detail::load_ctmc(s);
  if (kind == "spinflip") return detail::load_spinflip(s);
  if (kind == "diffusion1d" || kind == "bm") return detail::load_diffusion(s, kind);
  s.fail("kind", "unknown model kind '" + kind + "' (ctmc, spinflip, diffusion1d, bm)");
}

/// Model from a standalone JSON (or TOML) document.
inline ModelDefinition load_model_file(const std::filesystem::path& path) {
  const auto doc = ConfigDocument::load(path);
  return load_model(ConfigSection(doc));
}

}  // namespace regen
