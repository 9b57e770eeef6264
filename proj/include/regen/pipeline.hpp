#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regen/bounds.hpp"
#include "regen/cycles.hpp"
#include "regen/document.hpp"
#include "regen/error.hpp"
#include "regen/io.hpp"
#include "regen/models/loader.hpp"
#include "regen/montecarlo.hpp"
#include "regen/observable.hpp"
#include "regen/parallel.hpp"
#include "regen/random.hpp"
#include "regen/regeneration.hpp"
#include "regen/resolvent.hpp"
#include "regen/splitting.hpp"
#include "regen/verify.hpp"

namespace regen {

struct SimulateSettings {
  Method method = Method::kRetrospective;
  std::size_t cycles = 100000;
  std::size_t bridge_points = 32;
  std::size_t duration_samples = 0;  ///< extra exact Brownian durations for the tail-index check
};

struct ConstantSettings {
  std::size_t runs_per_start = 4000;
  std::size_t grid_points = 21;
  std::vector<double> laplace_lambdas{0.1, 0.5, 1.0};
};

struct CountSettings {
  std::size_t replications = 10000;
  std::vector<double> t_grid;
};

enum class LaplaceSource { kEmpirical, kBrownian };

struct CurveSettings {
  ExperimentConfig experiment;
  std::optional<double> alpha_reg;
  std::optional<double> slowly_varying;
  LaplaceSource laplace = LaplaceSource::kEmpirical;
};

struct VerifySettings {
  int moment_orders = 4;
  int count_orders = 3;
  std::optional<double> tail_index;
  double count_delta = 0.5;
  std::vector<double> count_levels{1.0, 2.0};
  VerifyThresholds thresholds;
};

/// Deliberate corruptions that the verification suite must detect.
struct FaultInjection {
  bool splice_cycles = false;
  double bound_divisor = 1.0;
  double k_scale = 1.0;

  bool active() const { return splice_cycles || bound_divisor != 1.0 || k_scale != 1.0; }
};

/// Command-line overrides of configuration values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> model_file;
};

struct RunConfig {
  ConfigDocument document;
  std::string name;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  ModelDefinition model;
  nlohmann::json model_json;
  std::optional<StateObservable> state_observable;
  std::optional<LineObservable> line_observable;
  SimulateSettings simulate;
  ConstantSettings constants;
  CountSettings counting;
  CurveSettings curve;
  VerifySettings verify;
  FaultInjection faults;

  const std::string& observable_name() const {
    return state_observable ? state_observable->name : line_observable->name;
  }
  double sup_norm() const { return state_observable ? state_observable->sup_norm() : line_observable->sup_norm; }
};

namespace detail {

inline void check_identifier(const ConfigSection& s, const std::string& key, const std::string& v) {
  const bool ok = !v.empty() && std::all_of(v.begin(), v.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
  if (!ok) s.fail(key, "must be a nonempty identifier of letters, digits, '_' or '-'");
}

inline std::size_t count_at_least(const ConfigSection& s, const std::string& key, std::size_t fallback,
                                  std::size_t minimum) {
  const auto v = s.unsigned_or(key, fallback);
  if (v < minimum) s.fail(key, "must be >= " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

inline void check_grid(const ConfigSection& s, const std::string& key, const std::vector<double>& g) {
  if (g.empty()) s.fail(key, "must be nonempty");
  if (!std::is_sorted(g.begin(), g.end()) || std::adjacent_find(g.begin(), g.end()) != g.end()) {
    s.fail(key, "must be strictly increasing");
  }
  if (!(g.front() > 0.0)) s.fail(key, "entries must be > 0");
}

inline StateObservable load_state_observable(const ConfigSection& s, const ModelDefinition& def) {
  s.allow_only({"name", "values", "indicator", "builtin", "center"});
  const auto& model = *def.chain;
  const auto n = model.size();
  const auto name = s.string_or("name", "f");
  check_identifier(s, "name", name);
  const int sources = int(s.has("values")) + int(s.has("indicator")) + int(s.has("builtin"));
  if (sources != 1) s.fail("", "give exactly one of 'values', 'indicator', 'builtin'");
  StateObservable f;
  if (s.has("values")) {
    const auto v = s.numbers("values");
    if (v.size() != n) s.fail("values", "needs " + std::to_string(n) + " entries, one per state");
    f = {name, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n)), false};
  } else if (s.has("indicator")) {
    std::vector<std::size_t> states;
    try {
      for (const auto& label : s.strings("indicator")) states.push_back(model.index_of(label));
    } catch (const ModelError& e) {
      s.fail("indicator", e.what());
    }
    f = StateObservable::indicator(name, n, states);
  } else {
    const auto b = s.string("builtin");
    if (b != "magnetization" || def.kind != "spinflip") {
      s.fail("builtin", "unknown builtin '" + b + "' (magnetization, spinflip models only)");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x) {
      const auto& label = model.labels()[x];
      const double up = static_cast<double>(std::count(label.begin(), label.end(), '+'));
      v[static_cast<Eigen::Index>(x)] = (2.0 * up - static_cast<double>(label.size())) / static_cast<double>(label.size());
    }
    f = {name, std::move(v), false};
  }
  if (s.boolean_or("center", false)) f = centered_observable(f, stationary_measure(model).weights);
  return f;
}

inline LineObservable load_line_observable(const ConfigSection& s) {
  s.allow_only({"name", "pieces"});
  const auto name = s.string_or("name", "f");
  check_identifier(s, "name", name);
  std::vector<Piece> pieces;
  for (const auto& row : s.matrix("pieces")) {
    if (row.size() != 3) s.fail("pieces", "each piece is [lo, hi, value]");
    pieces.push_back({row[0], row[1], row[2]});
  }
  if (pieces.empty()) s.fail("pieces", "needs at least one piece");
  try {
    auto f = LineObservable::piecewise(name, pieces);
    f.centered = std::abs(f.lebesgue_integral()) <= 1e-12 * f.sup_norm * (f.support_hi - f.support_lo);
    return f;
  } catch (const DomainError& e) {
    s.fail("pieces", e.what());
  }
}

}  // namespace detail

/// Parses and validates an experiment configuration.
inline RunConfig parse_run_config(ConfigDocument doc, const std::filesystem::path& base_dir,
                                  const Overrides& overrides = {}) {
  RunConfig cfg;
  cfg.document = std::move(doc);
  const ConfigSection root(cfg.document);
  root.allow_only({"schema_version", "name", "seed", "workers", "model", "model_file", "observable", "simulate",
                   "constants", "counting", "experiment", "verify", "fault_injection"});
  if (root.unsigned_or("schema_version", kSchemaVersion) != static_cast<std::uint64_t>(kSchemaVersion)) {
    root.fail("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  }
  cfg.name = root.string_or("name", "run");
  detail::check_identifier(root, "name", cfg.name);
  cfg.seed = overrides.seed.value_or(root.unsigned_or("seed", 1));
  cfg.workers = overrides.workers.value_or(detail::count_at_least(root, "workers", 1, 1));
  if (cfg.workers < 1) throw ConfigError("--workers must be >= 1");

  // model: override file, then model_file, then the inline table
  std::optional<std::filesystem::path> model_path = overrides.model_file;
  if (!model_path && root.has("model_file")) {
    if (root.has("model")) root.fail("model_file", "give either 'model' or 'model_file', not both");
    model_path = base_dir / root.string("model_file");
  }
  if (model_path) {
    const auto model_doc = ConfigDocument::load(*model_path);
    cfg.model = load_model(ConfigSection(model_doc));
    cfg.model_json = model_doc.root();
  } else {
    const auto s = root.section("model");
    cfg.model = load_model(s);
    cfg.model_json = s.json();
  }

  const auto obs = root.section("observable");
  if (cfg.model.is_chain()) {
    cfg.state_observable = detail::load_state_observable(obs, cfg.model);
  } else {
    cfg.line_observable = detail::load_line_observable(obs);
  }

  auto& ex = cfg.curve.experiment;
  const auto exp = root.section("experiment");
  exp.allow_only({"regime", "eta", "t_grid", "x_grid", "replications", "alpha_reg", "slowly_varying", "laplace"});
  try {
    ex.regime = parse_regime(exp.string_or("regime", "positive_eta"));
  } catch (const ConfigError& e) {
    exp.fail("regime", e.what());
  }
  ex.eta = exp.number_or("eta", 0.5);
  if (!(ex.eta > 0.0 && ex.eta <= 0.5)) exp.fail("eta", "must lie in (0, 1/2]");
  ex.t_grid = exp.numbers("t_grid");
  detail::check_grid(exp, "t_grid", ex.t_grid);
  ex.x_grid = exp.numbers("x_grid");
  detail::check_grid(exp, "x_grid", ex.x_grid);
  ex.replications = detail::count_at_least(exp, "replications", 10000, kMinTailSamples);
  ex.master_seed = cfg.seed;
  ex.workers = cfg.workers;
  ex.observable = cfg.observable_name();
  cfg.curve.alpha_reg = exp.optional_number("alpha_reg");
  cfg.curve.slowly_varying = exp.optional_number("slowly_varying");
  if (cfg.curve.alpha_reg && !(*cfg.curve.alpha_reg > 0.0 && *cfg.curve.alpha_reg < 1.0)) {
    exp.fail("alpha_reg", "must lie in (0, 1)");
  }
  if (cfg.curve.slowly_varying && !(*cfg.curve.slowly_varying > 0.0)) exp.fail("slowly_varying", "must be > 0");
  if (ex.regime == Regime::kRegular && (!cfg.curve.alpha_reg || !cfg.curve.slowly_varying)) {
    exp.fail("regime", "the regular regime needs 'alpha_reg' and 'slowly_varying'");
  }
  const auto laplace = exp.string_or("laplace", "empirical");
  if (laplace == "empirical") {
    cfg.curve.laplace = LaplaceSource::kEmpirical;
  } else if (laplace == "brownian") {
    if (cfg.model.kind != "bm") exp.fail("laplace", "the brownian transform needs a 'bm' model");
    cfg.curve.laplace = LaplaceSource::kBrownian;
  } else {
    exp.fail("laplace", "unknown source '" + laplace + "' (empirical, brownian)");
  }

  auto& sim = cfg.simulate;
  sim.method = cfg.model.is_chain() ? Method::kRetrospective : Method::kHitting;
  if (const auto s = root.optional_section("simulate")) {
    s->allow_only({"method", "cycles", "bridge_points", "duration_samples"});
    if (s->has("method")) {
      try {
        sim.method = parse_method(s->string("method"));
      } catch (const ConfigError& e) {
        s->fail("method", e.what());
      }
      if (cfg.model.is_chain() == (sim.method == Method::kHitting)) {
        s->fail("method", cfg.model.is_chain() ? "finite chains use 'forward' or 'retrospective'"
                                               : "diffusions use 'hitting'");
      }
    }
    sim.cycles = detail::count_at_least(*s, "cycles", sim.cycles, 2);
    sim.bridge_points = detail::count_at_least(*s, "bridge_points", sim.bridge_points, 1);
    sim.duration_samples = detail::count_at_least(*s, "duration_samples", 0, 0);
    if (sim.duration_samples > 0 && cfg.model.kind != "bm") {
      s->fail("duration_samples", "exact duration samples need a 'bm' model");
    }
  }

  if (const auto s = root.optional_section("constants")) {
    s->allow_only({"runs_per_start", "grid_points", "laplace_lambdas"});
    cfg.constants.runs_per_start = detail::count_at_least(*s, "runs_per_start", cfg.constants.runs_per_start, 2);
    cfg.constants.grid_points = detail::count_at_least(*s, "grid_points", cfg.constants.grid_points, 2);
    cfg.constants.laplace_lambdas = s->numbers_or("laplace_lambdas", cfg.constants.laplace_lambdas);
    for (double l : cfg.constants.laplace_lambdas) {
      if (!(l >= 0.0)) s->fail("laplace_lambdas", "entries must be >= 0");
    }
  }

  cfg.counting.t_grid = ex.t_grid;
  if (const auto s = root.optional_section("counting")) {
    s->allow_only({"replications", "t_grid"});
    cfg.counting.replications = detail::count_at_least(*s, "replications", cfg.counting.replications, 2);
    if (s->has("t_grid")) {
      cfg.counting.t_grid = s->numbers("t_grid");
      detail::check_grid(*s, "t_grid", cfg.counting.t_grid);
    }
  }
  if (ex.regime == Regime::kNullGeneral) {
    for (double t : ex.t_grid) {
      if (std::find(cfg.counting.t_grid.begin(), cfg.counting.t_grid.end(), t) == cfg.counting.t_grid.end()) {
        root.fail("counting", "t_grid must contain every experiment t for the null regime");
      }
    }
  }

  auto& vf = cfg.verify;
  if (const auto s = root.optional_section("verify")) {
    s->allow_only({"moment_orders", "count_orders", "tail_index", "count_delta", "count_levels", "sigmas",
                   "p_value", "hill_tolerance", "confidence"});
    vf.moment_orders = static_cast<int>(s->unsigned_or("moment_orders", 4));
    vf.count_orders = static_cast<int>(s->unsigned_or("count_orders", 3));
    if (vf.moment_orders < 1 || vf.moment_orders > 4) s->fail("moment_orders", "must lie in [1, 4]");
    if (vf.count_orders < 1 || vf.count_orders > 4) s->fail("count_orders", "must lie in [1, 4]");
    vf.tail_index = s->optional_number("tail_index");
    vf.count_delta = s->positive_or("count_delta", vf.count_delta);
    vf.count_levels = s->numbers_or("count_levels", vf.count_levels);
    vf.thresholds.sigmas = s->positive_or("sigmas", vf.thresholds.sigmas);
    vf.thresholds.p_value = s->positive_or("p_value", vf.thresholds.p_value);
    vf.thresholds.hill_tolerance = s->positive_or("hill_tolerance", vf.thresholds.hill_tolerance);
    vf.thresholds.confidence = s->positive_or("confidence", vf.thresholds.confidence);
    if (!(vf.thresholds.confidence < 1.0)) s->fail("confidence", "must be < 1");
  }

  if (const auto s = root.optional_section("fault_injection")) {
    s->allow_only({"splice_cycles", "bound_divisor", "k_scale"});
    cfg.faults.splice_cycles = s->boolean_or("splice_cycles", false);
    cfg.faults.bound_divisor = s->positive_or("bound_divisor", 1.0);
    cfg.faults.k_scale = s->positive_or("k_scale", 1.0);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {}) {
  return parse_run_config(ConfigDocument::load(path), path.parent_path(), overrides);
}

/// Executes the stages of one configured experiment. Owns the split chain,
/// which refers to the model inside the configuration, so it neither copies nor moves.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.model.is_chain()) chain_ = std::make_unique<SplitChain>(*cfg_.model.chain, cfg_.model.small_set);
  }

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const RunConfig& config() const { return cfg_; }
  const SplitChain* chain() const { return chain_.get(); }

  /// Cycles of the configured observable and of its absolute value.
  RegenerationStream cycles() const {
    const auto& sim = cfg_.simulate;
    if (chain_) {
      const auto& f = *cfg_.state_observable;
      const std::vector<StateObservable> obs{f, f.abs()};
      if (sim.method == Method::kForward) {
        Stream rng(cfg_.seed, 0, StreamTag::kForward);
        const auto z0 = chain_->initial_state(cfg_.model.start_state, rng);
        return chain_->forward(z0, sim.cycles, obs, rng, SplitOptions{sim.bridge_points});
      }
      Stream rng(cfg_.seed, 0, StreamTag::kRetrospective);
      return chain_->retrospective(cfg_.model.start_state, sim.cycles, obs, rng);
    }
    const auto& f = *cfg_.line_observable;
    const std::vector<LineObservable> obs{f, f.abs()};
    Stream rng(cfg_.seed, 0, StreamTag::kCycles);
    auto run = simulate_diffusion_cycles(*cfg_.model.diffusion, sim.cycles, obs, rng);
    return make_stream(std::move(run.cycles), {f.name, f.name + "_abs"});
  }

  /// Exact Brownian cycle durations for the tail-index check.
  std::vector<double> duration_samples() const {
    std::vector<double> d(cfg_.simulate.duration_samples);
    if (d.empty()) return d;
    const auto& m = *cfg_.model.diffusion;
    Stream rng(cfg_.seed, 1, StreamTag::kCycles);
    for (auto& v : d) v = sample_bm_cycle_duration(rng, std::abs(m.level_b - m.level_a), *m.brownian_sigma);
    return d;
  }

  /// N_t over replications started from nu (finite chains) or from level_a.
  CountTable counts() const {
    const auto& grid = cfg_.counting.t_grid;
    const double horizon = grid.back();
    std::vector<std::vector<double>> durations(cfg_.counting.replications);
    parallel_blocks(durations.size(), cfg_.workers, [&](std::size_t begin, std::size_t end) {
      std::optional<DiffusionStepper> stepper;
      const std::vector<LineObservable> none;
      if (!chain_ && cfg_.model.kind != "bm") stepper.emplace(*cfg_.model.diffusion, none);
      for (std::size_t r = begin; r < end; ++r) {
        auto rng = replication_stream(cfg_.seed, r, StreamTag::kCounting);
        auto& d = durations[r];
        if (chain_) {
          const auto x0 = sample_categorical(chain_->cert().nu, rng);
          for (const auto& c : chain_->retrospective_until(x0, horizon, {}, rng)) d.push_back(c.duration);
          continue;
        }
        const auto& m = *cfg_.model.diffusion;
        double total = 0.0;
        while (total <= horizon) {
          if (stepper) {
            const auto rec = stepper->run_cycle(m.level_a, rng);
            if (!rec) throw NumericError("cycle exceeded max_cycle_duration while counting regenerations");
            d.push_back(rec->duration);
          } else {
            d.push_back(sample_bm_cycle_duration(rng, std::abs(m.level_b - m.level_a), *m.brownian_sigma));
          }
          total += d.back();
        }
      }
    });
    return count_regenerations(durations, grid);
  }

  /// A_t samples under pi (finite chains) or from the configured start point.
  SampleTable samples() const {
    const auto& ex = cfg_.curve.experiment;
    if (chain_) {
      const CtmcIntegrator integ(*cfg_.model.chain, *cfg_.state_observable,
                                 stationary_measure(*cfg_.model.chain).weights);
      return run_replications(integ, ex);
    }
    const DiffusionIntegrator integ(*cfg_.model.diffusion, *cfg_.line_observable, cfg_.model.start_position);
    return run_replications(integ, ex);
  }

  CfEstimate cf() const {
    const auto& c = cfg_.constants;
    if (chain_) return estimate_cf(*chain_, *cfg_.state_observable, c.runs_per_start, cfg_.seed, cfg_.workers);
    const auto starts = diffusion_start_grid(*cfg_.model.diffusion, *cfg_.line_observable, c.grid_points);
    return estimate_cf(*cfg_.model.diffusion, *cfg_.line_observable, starts, c.runs_per_start, cfg_.seed,
                       cfg_.workers);
  }

  ConstantEstimates constants(const RegenerationStream& cycles, const CountTable& counts) const {
    const auto c = cf();
    auto out = constants_from_cycles(cycles, cfg_.sup_norm(), {c.value, c.per_start[c.argmax].stderr_},
                                     cfg_.observable_name());
    out.vstar = counts.vstar;
    const auto d = cycles.durations();
    out.laplace = laplace_table(d, cfg_.constants.laplace_lambdas);
    return out;
  }

  std::optional<LaplaceTransform> laplace(const RegenerationStream* cycles) const {
    const auto regime = cfg_.curve.experiment.regime;
    if (regime == Regime::kNullGeneral) return std::nullopt;
    if (cfg_.curve.laplace == LaplaceSource::kBrownian) {
      const auto& m = *cfg_.model.diffusion;
      return LaplaceTransform::brownian(std::abs(m.level_b - m.level_a), *m.brownian_sigma);
    }
    if (!cycles) throw DataError("the empirical Laplace transform needs cycle durations");
    return LaplaceTransform::empirical(cycles->durations());
  }

  DeviationCurve curve(const SampleTable& samples, const ConstantEstimates& constants,
                       const RegenerationStream* cycles) const {
    const auto& cv = cfg_.curve;
    BoundQuery base;
    base.laplace = laplace(cycles);
    base.alpha_reg = cv.alpha_reg;
    base.slowly_varying = cv.slowly_varying;
    auto query = bound_query(cv.experiment, constants, std::move(base));
    return deviation_curve(samples, cv.experiment.x_grid, std::move(query), constants.vstar);
  }

  /// Every verification check, with the configured fault injections applied.
  std::vector<CheckReport> checks(const RegenerationStream& cycles, const CountTable& counts,
                                  const SampleTable& samples, const ConstantEstimates& constants,
                                  std::span<const double> extra_durations = {}) const {
    const auto& vf = cfg_.verify;
    const auto& th = vf.thresholds;
    const auto& faults = cfg_.faults;
    std::vector<CheckReport> out;
    const double k_f = constants.k_f * faults.k_scale;
    for (std::size_t j = 0; j < cycles.observables.size(); ++j) {
      auto reports = check_xi_moments(cycles.xi(j), k_f, vf.moment_orders, th);
      for (auto& r : reports) {
        r.check_name = "xi_" + cycles.observables[j] + r.check_name.substr(2);
        out.push_back(std::move(r));
      }
    }
    for (auto& r : check_nt_moments(counts, vf.count_orders, th, vf.count_delta, vf.count_levels)) {
      out.push_back(std::move(r));
    }
    const auto dependence_input = faults.splice_cycles ? splice_cycles(cycles) : cycles;
    std::optional<Eigen::VectorXd> nu;
    if (chain_) nu = chain_->cert().nu;
    for (auto& r : check_dependence_structure(dependence_input, 0, nu, th)) out.push_back(std::move(r));
    if (vf.tail_index) {
      const auto d = extra_durations.empty() ? cycles.durations()
                                             : std::vector<double>(extra_durations.begin(), extra_durations.end());
      out.push_back(check_tail_index(d, *vf.tail_index, th));
    }
    auto curve_rows = curve(samples, constants, &cycles);
    if (faults.bound_divisor != 1.0) curve_rows = scale_bounds(std::move(curve_rows), faults.bound_divisor);
    out.push_back(check_bound_domination(curve_rows));
    return out;
  }

 private:
  RunConfig cfg_;
  std::unique_ptr<SplitChain> chain_;
};

// ---- artifact files ------------------------------------------------------

inline void write_cycles_csv(const std::filesystem::path& path, const RegenerationStream& s) {
  std::vector<std::string> header{"cycle_index", "duration"};
  const bool states = s.initial.start_state.has_value();
  if (states) header.push_back("start_state");
  for (const auto& name : s.observables) header.push_back("xi_" + name);
  CsvWriter csv(header);
  std::vector<double> row;
  const auto emit = [&](const RegenerationRecord& r) {
    row.assign({static_cast<double>(r.index), r.duration});
    if (states) row.push_back(static_cast<double>(r.start_state.value_or(0)));
    row.insert(row.end(), r.xi.begin(), r.xi.end());
    csv.numbers(row);
  };
  emit(s.initial);
  for (const auto& r : s.records) emit(r);
  csv.save(path);
}

inline RegenerationStream read_cycles_csv(const std::filesystem::path& path) {
  const auto t = read_numeric_csv(path);
  const auto idx = t.column("cycle_index");
  const auto dur = t.column("duration");
  std::optional<std::size_t> state;
  std::vector<std::string> names;
  std::vector<std::size_t> xi_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "start_state") state = c;
    if (t.header[c].rfind("xi_", 0) == 0) {
      names.push_back(t.header[c].substr(3));
      xi_cols.push_back(c);
    }
  }
  if (names.empty()) throw DataError(path.string() + ": no xi_ columns");
  std::vector<RegenerationRecord> cycles;
  cycles.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    RegenerationRecord r;
    r.index = static_cast<std::size_t>(row[idx]);
    r.duration = row[dur];
    if (state) r.start_state = static_cast<std::size_t>(row[*state]);
    for (auto c : xi_cols) r.xi.push_back(row[c]);
    cycles.push_back(std::move(r));
  }
  return make_stream(std::move(cycles), std::move(names));
}

/// Wide table: one row per replication, one column "t_<t>" per horizon.
inline void write_grid_csv(const std::filesystem::path& path, std::span<const double> t_grid,
                           const std::vector<std::vector<double>>& values) {
  std::vector<std::string> header{"replication"};
  for (double t : t_grid) header.push_back("t_" + format_number(t));
  CsvWriter csv(header);
  const std::size_t reps = values.empty() ? 0 : values.front().size();
  std::vector<double> row(t_grid.size() + 1);
  for (std::size_t r = 0; r < reps; ++r) {
    row[0] = static_cast<double>(r);
    for (std::size_t k = 0; k < t_grid.size(); ++k) row[k + 1] = values[k][r];
    csv.numbers(row);
  }
  csv.save(path);
}

inline std::pair<std::vector<double>, std::vector<std::vector<double>>> read_grid_csv(
    const std::filesystem::path& path) {
  const auto table = read_numeric_csv(path);
  std::vector<double> grid;
  std::vector<std::vector<double>> values;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& h = table.header[c];
    if (h.rfind("t_", 0) != 0) throw DataError(path.string() + ": unexpected column '" + h + "'");
    char* end = nullptr;
    grid.push_back(std::strtod(h.c_str() + 2, &end));
    if (*end != '\0') throw DataError(path.string() + ": bad horizon in column '" + h + "'");
    values.push_back(table.values(c));
  }
  if (grid.empty() || table.rows.empty()) throw DataError(path.string() + ": no data");
  return {std::move(grid), std::move(values)};
}

inline void write_samples_csv(const std::filesystem::path& path, const SampleTable& s) {
  write_grid_csv(path, s.t_grid, s.values);
}

inline SampleTable read_samples_csv(const std::filesystem::path& path) {
  auto [grid, values] = read_grid_csv(path);
  return {std::move(grid), std::move(values)};
}

inline void write_counts_csv(const std::filesystem::path& path, const CountTable& c) {
  write_grid_csv(path, c.t_grid, c.n_t);
}

inline CountTable read_counts_csv(const std::filesystem::path& path) {
  auto [grid, values] = read_grid_csv(path);
  CountTable out;
  out.t_grid = std::move(grid);
  out.n_t = std::move(values);
  for (std::size_t k = 0; k < out.t_grid.size(); ++k) {
    const auto e = stats::mean_estimate(out.n_t[k]);
    out.vstar.push_back({out.t_grid[k], e.value + 1.0, e.stderr_});
  }
  return out;
}

inline void write_durations_csv(const std::filesystem::path& path, std::span<const double> d) {
  CsvWriter csv({"duration"});
  for (double v : d) csv.numbers(std::span<const double>(&v, 1));
  csv.save(path);
}

inline std::vector<double> read_durations_csv(const std::filesystem::path& path) {
  const auto t = read_numeric_csv(path);
  return t.values(t.column("duration"));
}

inline nlohmann::json constants_to_json(const ConstantEstimates& c) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["observable"] = c.observable;
  j["sup_norm"] = c.sup_norm;
  j["c_f"] = {{"value", c.c_f.value}, {"stderr", c.c_f.stderr_}};
  j["k_f"] = c.k_f;
  j["b_f"] = c.b_f;
  j["m_hat"] = {{"value", c.m_hat.value}, {"stderr", c.m_hat.stderr_}};
  j["cycles"] = c.cycles;
  j["mu_total_mass"] = {{"probability", 1.0}, {"cycle", c.m_hat.value}};
  j["vstar"] = nlohmann::json::array();
  for (const auto& p : c.vstar) j["vstar"].push_back({{"t", p.t}, {"value", p.value}, {"stderr", p.stderr_}});
  j["laplace"] = nlohmann::json::array();
  for (const auto& p : c.laplace) {
    j["laplace"].push_back({{"lambda", p.lambda}, {"value", p.value}, {"stderr", p.stderr_}});
  }
  return j;
}

inline ConstantEstimates constants_from_json(const nlohmann::json& j, const std::string& source) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ConfigError(source + ": unsupported schema_version");
    }
    ConstantEstimates c;
    c.observable = j.at("observable").get<std::string>();
    c.sup_norm = j.at("sup_norm").get<double>();
    c.c_f = {j.at("c_f").at("value").get<double>(), j.at("c_f").at("stderr").get<double>()};
    c.k_f = j.at("k_f").get<double>();
    c.b_f = j.at("b_f").get<double>();
    c.m_hat = {j.at("m_hat").at("value").get<double>(), j.at("m_hat").at("stderr").get<double>()};
    c.cycles = j.at("cycles").get<std::size_t>();
    for (const auto& p : j.at("vstar")) {
      c.vstar.push_back({p.at("t").get<double>(), p.at("value").get<double>(), p.at("stderr").get<double>()});
    }
    for (const auto& p : j.at("laplace")) {
      c.laplace.push_back({p.at("lambda").get<double>(), p.at("value").get<double>(), p.at("stderr").get<double>()});
    }
    if (!(c.k_f > 0.0) || !(c.b_f > 0.0) || !(c.sup_norm >= 0.0)) {
      throw ConfigError(source + ": k_f, b_f must be > 0 and sup_norm >= 0");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(source + ": malformed constants: " + e.what());
  }
}

inline void write_curve_csv(const std::filesystem::path& path, const DeviationCurve& curve) {
  CsvWriter csv({"regime", "t", "x", "eta", "level", "p_hat", "ci_low", "ci_high", "gaussian_term",
                 "exponential_term", "clock_term", "total", "vacuous", "dominated"});
  for (const auto& r : curve.rows) {
    const auto& b = r.bound;
    csv.row({regime_name(r.regime), format_number(r.t), format_number(r.x), format_number(r.eta),
             format_number(r.level), format_number(r.p_hat), format_number(r.ci_low), format_number(r.ci_high),
             format_number(b.gaussian_term), format_number(b.exponential_term), format_number(b.clock_term),
             format_number(b.total), b.vacuous ? "true" : "false", r.dominated ? "true" : "false"});
  }
  csv.save(path);
}

/// One gnuplot file per t: data block 0 is (x, ci_high), block 1 is (x, bound).
inline std::vector<std::filesystem::path> write_curve_slices(const std::filesystem::path& dir,
                                                             const DeviationCurve& curve) {
  std::vector<double> ts;
  for (const auto& r : curve.rows) {
    if (std::find(ts.begin(), ts.end(), r.t) == ts.end()) ts.push_back(r.t);
  }
  std::vector<std::filesystem::path> out;
  for (double t : ts) {
    std::string empirical = "# t = " + format_number(t) + "\n# x ci_high\n";
    std::string bound = "# x bound\n";
    for (const auto& r : curve.rows) {
      if (r.t != t) continue;
      empirical += format_number(r.x) + " " + format_number(r.ci_high) + "\n";
      bound += format_number(r.x) + " " + format_number(r.bound.total) + "\n";
    }
    const auto path = dir / ("curve_t" + format_number(t) + ".dat");
    write_text_file(path, empirical + "\n\n" + bound);
    out.push_back(path);
  }
  return out;
}

inline nlohmann::json report_to_json(const std::vector<CheckReport>& reports, const RunConfig& cfg) {
  const auto& th = cfg.verify.thresholds;
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["passed"] = all_passed(reports);
  j["thresholds"] = {{"sigmas", th.sigmas},
                     {"p_value", th.p_value},
                     {"hill_tolerance", th.hill_tolerance},
                     {"light_tail_index", th.light_tail_index},
                     {"confidence", th.confidence}};
  j["fault_injection"] = {{"splice_cycles", cfg.faults.splice_cycles},
                          {"bound_divisor", cfg.faults.bound_divisor},
                          {"k_scale", cfg.faults.k_scale}};
  j["checks"] = nlohmann::json::array();
  for (const auto& r : reports) {
    j["checks"].push_back({{"check_name", r.check_name},
                           {"status", status_name(r.status)},
                           {"statistic", r.statistic},
                           {"threshold", r.threshold},
                           {"details", r.details}});
  }
  return j;
}

}  // namespace regen
