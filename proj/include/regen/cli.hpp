#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regen/error.hpp"
#include "regen/io.hpp"
#include "regen/pipeline.hpp"

#ifndef REGEN_VERSION
#define REGEN_VERSION "0.0.0"
#endif

namespace regen::cli {

enum ExitCode : int { kSuccess = 0, kCheckFailure = 1, kInputError = 2 };

inline constexpr const char* kOutputRootEnv = "HARRIS_REGEN_OUT";
inline constexpr const char* kDefaultOutputRoot = "runs";

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> out;
};

/// --out if given, else <root>/<config name> with root from the environment or "runs".
inline std::filesystem::path output_dir(const CommonOptions& opt, const RunConfig& cfg) {
  if (opt.out) return *opt.out;
  const char* root = std::getenv(kOutputRootEnv);
  return std::filesystem::path(root && *root ? root : kDefaultOutputRoot) / cfg.name;
}

namespace detail {

using Clock = std::chrono::system_clock;

inline std::string config_file_name(const RunConfig& cfg) {
  return cfg.document.format() == ConfigDocument::Format::kJson ? "config.json" : "config.toml";
}

/// Stores the verbatim config and the resolved model next to the outputs.
inline void store_inputs(const std::filesystem::path& dir, const RunConfig& cfg) {
  write_text_file(dir / config_file_name(cfg), cfg.document.text());
  write_json_file(dir / "model.json", cfg.model_json);
}

inline nlohmann::json manifest(const std::string& command, const RunConfig& cfg, const Pipeline& p,
                               Clock::time_point started, const std::vector<std::string>& outputs) {
  const auto finished = Clock::now();
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["name"] = cfg.name;
  j["config_file"] = config_file_name(cfg);
  j["config_hash"] = sha256_hex(cfg.document.text());
  j["model_file"] = "model.json";
  j["model_hash"] = sha256_hex(cfg.model_json.dump());
  j["master_seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["method"] = method_name(cfg.simulate.method);
  j["observable"] = cfg.observable_name();
  j["code_version"] = REGEN_VERSION;
  j["started_at"] = utc_timestamp(started);
  j["finished_at"] = utc_timestamp(finished);
  j["wall_time_seconds"] = std::chrono::duration<double>(finished - started).count();
  j["outputs"] = outputs;
  if (const auto* chain = p.chain()) {
    const auto& cert = chain->cert();
    std::vector<std::string> small_set;
    for (auto x : cert.small_set) small_set.push_back(chain->model().labels()[x]);
    j["cert"] = {{"small_set", small_set},
                 {"alpha_minor", cert.alpha},
                 {"nu", std::vector<double>(cert.nu.data(), cert.nu.data() + cert.nu.size())}};
  }
  return j;
}

inline void print_reports(std::ostream& out, const std::vector<CheckReport>& reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.check_name.size());
  out << std::left << std::setw(static_cast<int>(width)) << "check" << "  " << std::setw(7) << "status"
      << "  " << std::setw(14) << "statistic" << "  threshold\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(width)) << r.check_name << "  " << std::setw(7)
        << status_name(r.status) << "  " << std::setw(14) << format_number(r.statistic) << "  "
        << format_number(r.threshold) << "\n";
  }
}

inline void print_curve(std::ostream& out, const DeviationCurve& curve) {
  out << "t x level ci_high bound vacuous dominated\n";
  for (const auto& r : curve.rows) {
    out << format_number(r.t) << ' ' << format_number(r.x) << ' ' << format_number(r.level) << ' '
        << format_number(r.ci_high) << ' ' << format_number(r.bound.total) << ' '
        << (r.bound.vacuous ? "yes" : "no") << ' ' << (r.dominated ? "yes" : "NO") << "\n";
  }
}

inline Overrides overrides(const CommonOptions& opt) { return {opt.seed, opt.workers, std::nullopt}; }

inline void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("missing " + what + " '" + p.string() + "'");
}

}  // namespace detail

/// Cycles, N_t counts, A_t samples and constants for one configuration.
inline int cmd_simulate(const std::filesystem::path& config, const CommonOptions& opt, std::ostream& out) {
  const auto started = detail::Clock::now();
  const Pipeline p(load_run_config(config, detail::overrides(opt)));
  const auto& cfg = p.config();
  const auto dir = output_dir(opt, cfg);
  std::filesystem::create_directories(dir);
  detail::store_inputs(dir, cfg);

  const auto cycles = p.cycles();
  write_cycles_csv(dir / "cycles.csv", cycles);
  const auto counts = p.counts();
  write_counts_csv(dir / "nt.csv", counts);
  const auto samples = p.samples();
  write_samples_csv(dir / "samples.csv", samples);
  const auto constants = p.constants(cycles, counts);
  write_json_file(dir / "constants.json", constants_to_json(constants));
  std::vector<std::string> outputs{"cycles.csv", "nt.csv", "samples.csv", "constants.json", "model.json",
                                   detail::config_file_name(cfg)};
  if (cfg.simulate.duration_samples > 0) {
    write_durations_csv(dir / "durations.csv", p.duration_samples());
    outputs.emplace_back("durations.csv");
  }
  write_json_file(dir / "manifest.json", detail::manifest("simulate", cfg, p, started, outputs));
  out << "simulate: " << cycles.stationary_count() + 1 << " cycles, " << samples.values.front().size()
      << " replications -> " << dir.string() << "\n";
  return kSuccess;
}

/// Constants only (C(f), K(f), B(f), m, v*_t, Laplace table).
inline int cmd_estimate(const std::filesystem::path& config, const CommonOptions& opt, std::ostream& out) {
  const auto started = detail::Clock::now();
  const Pipeline p(load_run_config(config, detail::overrides(opt)));
  const auto& cfg = p.config();
  const auto dir = output_dir(opt, cfg);
  std::filesystem::create_directories(dir);
  detail::store_inputs(dir, cfg);
  const auto constants = p.constants(p.cycles(), p.counts());
  write_json_file(dir / "constants.json", constants_to_json(constants));
  write_json_file(dir / "estimate_manifest.json",
                  detail::manifest("estimate", cfg, p, started, {"constants.json"}));
  out << "estimate: C(f) = " << format_number(constants.c_f.value) << ", K(f) = " << format_number(constants.k_f)
      << ", B(f) = " << format_number(constants.b_f) << ", m_hat = " << format_number(constants.m_hat.value)
      << " -> " << (dir / "constants.json").string() << "\n";
  return kSuccess;
}

/// Re-reads a simulate directory, runs every check and writes report.json.
inline int cmd_verify(const std::filesystem::path& dir, const CommonOptions& opt, std::ostream& out,
                      std::ostream& err) {
  const auto manifest_path = dir / "manifest.json";
  detail::require_file(manifest_path, "simulate manifest");
  const auto manifest = read_json_file(manifest_path);
  std::string config_file;
  std::string config_hash;
  std::uint64_t seed = 0;
  try {
    config_file = manifest.at("config_file").get<std::string>();
    config_hash = manifest.at("config_hash").get<std::string>();
    seed = manifest.at("master_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  const auto doc = ConfigDocument::load(dir / config_file);
  if (sha256_hex(doc.text()) != config_hash) {
    throw ConfigError((dir / config_file).string() + ": config hash does not match the manifest");
  }
  Overrides ov{seed, opt.workers, dir / "model.json"};
  const Pipeline p(parse_run_config(doc, dir, ov));
  for (const char* f : {"cycles.csv", "nt.csv", "samples.csv", "constants.json"}) detail::require_file(dir / f, "input");
  const auto cycles = read_cycles_csv(dir / "cycles.csv");
  const auto counts = read_counts_csv(dir / "nt.csv");
  const auto samples = read_samples_csv(dir / "samples.csv");
  const auto constants = constants_from_json(read_json_file(dir / "constants.json"), (dir / "constants.json").string());
  std::vector<double> durations;
  if (std::filesystem::exists(dir / "durations.csv")) durations = read_durations_csv(dir / "durations.csv");

  const auto reports = p.checks(cycles, counts, samples, constants, durations);
  write_json_file(dir / "report.json", report_to_json(reports, p.config()));
  detail::print_reports(out, reports);
  if (all_passed(reports)) {
    out << "verify: all non-vacuous checks passed\n";
    return kSuccess;
  }
  err << "verify: failing checks:";
  for (const auto& r : reports) {
    if (r.status == CheckStatus::kFail) err << ' ' << r.check_name;
  }
  err << "\n";
  return kCheckFailure;
}

/// Deviation curve against the bound; exit 1 if a non-vacuous point is not dominated.
inline int cmd_curve(const std::filesystem::path& config, const std::filesystem::path& constants_path,
                     const CommonOptions& opt, std::ostream& out, std::ostream& err) {
  const auto started = detail::Clock::now();
  const Pipeline p(load_run_config(config, detail::overrides(opt)));
  const auto& cfg = p.config();
  const auto constants = constants_from_json(read_json_file(constants_path), constants_path.string());
  const auto dir = output_dir(opt, cfg);
  std::filesystem::create_directories(dir);
  detail::store_inputs(dir, cfg);

  const auto samples = p.samples();
  std::optional<RegenerationStream> cycles;
  if (cfg.curve.laplace == LaplaceSource::kEmpirical && cfg.curve.experiment.regime != Regime::kNullGeneral) {
    cycles = p.cycles();
  }
  auto curve = p.curve(samples, constants, cycles ? &*cycles : nullptr);
  if (cfg.faults.bound_divisor != 1.0) curve = scale_bounds(std::move(curve), cfg.faults.bound_divisor);
  write_samples_csv(dir / "samples.csv", samples);
  write_curve_csv(dir / "curve.csv", curve);
  std::vector<std::string> outputs{"curve.csv", "samples.csv"};
  for (const auto& s : write_curve_slices(dir, curve)) outputs.push_back(s.filename().string());
  write_json_file(dir / "curve_manifest.json", detail::manifest("curve", cfg, p, started, outputs));
  detail::print_curve(out, curve);
  const bool dominated =
      std::all_of(curve.rows.begin(), curve.rows.end(), [](const CurveRow& r) { return r.dominated; });
  if (!dominated) {
    err << "curve: some non-vacuous grid points exceed the bound\n";
    return kCheckFailure;
  }
  return kSuccess;
}

/// Summary of a verified run directory.
inline int cmd_report(const std::filesystem::path& dir, std::ostream& out) {
  detail::require_file(dir / "manifest.json", "manifest");
  detail::require_file(dir / "report.json", "report (run verify first)");
  const auto manifest = read_json_file(dir / "manifest.json");
  const auto report = read_json_file(dir / "report.json");
  try {
    out << "run        " << manifest.at("name").get<std::string>() << "\n"
        << "seed       " << manifest.at("master_seed").get<std::uint64_t>() << "\n"
        << "config     " << manifest.at("config_hash").get<std::string>() << "\n"
        << "version    " << manifest.at("code_version").get<std::string>() << "\n";
    if (std::filesystem::exists(dir / "constants.json")) {
      const auto c = constants_from_json(read_json_file(dir / "constants.json"), (dir / "constants.json").string());
      out << "constants  K(f) = " << format_number(c.k_f) << ", B(f) = " << format_number(c.b_f)
          << ", m_hat = " << format_number(c.m_hat.value) << " (" << c.cycles << " cycles)\n";
    }
    std::size_t pass = 0, fail = 0, vacuous = 0;
    for (const auto& r : report.at("checks")) {
      const auto s = r.at("status").get<std::string>();
      (s == "pass" ? pass : s == "fail" ? fail : vacuous) += 1;
      if (s == "fail") out << "FAIL       " << r.at("check_name").get<std::string>() << "\n";
    }
    out << "checks     " << pass << " pass, " << fail << " fail, " << vacuous << " vacuous\n";
    return report.at("passed").get<bool>() ? kSuccess : kCheckFailure;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(dir.string() + ": malformed run files: " + e.what());
  }
}

/// Parses the command line and dispatches; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Regenerative simulation and deviation-bound verification for Harris recurrent processes",
               "harris_regen"};
  app.set_version_flag("--version", REGEN_VERSION);
  app.require_subcommand(1);
  CommonOptions opt;
  std::filesystem::path config;
  std::filesystem::path constants;
  std::filesystem::path dir;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory (default $HARRIS_REGEN_OUT/<name> or runs/<name>)");
  };
  auto* simulate = app.add_subcommand("simulate", "cycles, N_t counts, A_t samples and constants");
  simulate->add_option("config", config, "experiment config (.toml or .json)")->required();
  add_common(simulate);
  auto* estimate = app.add_subcommand("estimate", "constants C(f), K(f), B(f), m, v*_t");
  estimate->add_option("config", config, "experiment config (.toml or .json)")->required();
  add_common(estimate);
  auto* verify = app.add_subcommand("verify", "run every check on a simulate directory");
  verify->add_option("dir", dir, "simulate output directory")->required();
  verify->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  auto* curve = app.add_subcommand("curve", "deviation curve against the bound");
  curve->add_option("config", config, "experiment config (.toml or .json)")->required();
  curve->add_option("constants", constants, "constants.json from simulate or estimate")->required();
  add_common(curve);
  auto* report = app.add_subcommand("report", "summary of a verified directory");
  report->add_option("dir", dir, "verified output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }
  try {
    if (simulate->parsed()) return cmd_simulate(config, opt, out);
    if (estimate->parsed()) return cmd_estimate(config, opt, out);
    if (verify->parsed()) return cmd_verify(dir, opt, out, err);
    if (curve->parsed()) return cmd_curve(config, constants, opt, out, err);
    if (report->parsed()) return cmd_report(dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace regen::cli
