// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: runs single experiments, parameter sweeps,
// plot-data emission, and scenario validation.
//
// Exit codes: 0 success, 1 error, 2 infeasible, 64 usage, 66 missing results.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isac/reporting.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitUsage = 64;
constexpr int kExitNoResults = 66;

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
  if (g_log_level >= 1) std::fprintf(stderr, "%s\n", msg.c_str());
}

struct CommonArgs {
  std::string scenario;
  std::string out = "results";
  std::uint64_t seed = 1;
  std::string log_level = "info";
  // RL overrides; negative means "keep the default"
  int episodes = -1;
  double gamma = -1.0;
  double tau_soft = -1.0;
  double penalty = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_scenario) {
  auto* s = cmd->add_option("--scenario", a.scenario, "scenario JSON file");
  if (needs_scenario) s->required();
  cmd->add_option("--seed", a.seed, "base RNG seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--log-level", a.log_level, "quiet|info|debug");
  cmd->add_option("--episodes", a.episodes, "DDPG training episodes");
  cmd->add_option("--gamma", a.gamma, "DDPG discount factor");
  cmd->add_option("--tau-soft", a.tau_soft, "target network soft-update rate");
  cmd->add_option("--penalty", a.penalty, "constraint-violation penalty");
}

void apply_log_level(const CommonArgs& a) {
  g_log_level = a.log_level == "quiet" ? 0 : a.log_level == "debug" ? 2 : 1;
}

nlohmann::json apply_overrides(const CommonArgs& a, isac::BcdOptions& opt) {
  nlohmann::json ov = nlohmann::json::object();
  if (a.episodes >= 0) ov["episodes"] = opt.ddpg.episodes = a.episodes;
  if (a.gamma >= 0.0) ov["gamma"] = opt.ddpg.gamma = a.gamma;
  if (a.tau_soft >= 0.0) ov["tau_soft"] = opt.ddpg.tau_soft = a.tau_soft;
  if (a.penalty >= 0.0) ov["penalty"] = opt.ddpg.penalty = a.penalty;
  return ov;
}

// Manifest (and a scenario copy for later hash checks) written before any
// computation so a crashed run still identifies itself.
void write_preamble(const std::string& command, const CommonArgs& a,
                    const nlohmann::json& overrides) {
  isac::RunManifest m;
  m.command = command;
  m.scenario_path = a.scenario;
  m.scenario_hash = isac::hash_file(a.scenario);
  m.seed = a.seed;
  m.overrides = overrides;
  m.created_utc = isac::manifest_timestamp();
  isac::write_manifest(m, a.out);
  std::filesystem::copy_file(
      a.scenario, std::filesystem::path(a.out) / "scenario.json",
      std::filesystem::copy_options::overwrite_existing);
}

int status_to_exit(isac::RunStatus s) {
  switch (s) {
    case isac::RunStatus::Converged:
    case isac::RunStatus::IterationLimit:
      return kExitOk;
    case isac::RunStatus::Infeasible:
      return kExitInfeasible;
    default:
      return kExitError;
  }
}

int cmd_run(const CommonArgs& a, const std::string& mode) {
  const auto cfg = isac::load_scenario(a.scenario);
  isac::BcdOptions opt;
  opt.seed = a.seed;
  auto overrides = apply_overrides(a, opt);
  if (mode != "proposed") overrides["mode"] = mode;
  write_preamble("run", a, overrides);

  isac::BcdReport rep;
  if (mode == "proposed") {
    opt.trajectory_mode = isac::TrajectoryMode::Ddpg;
    rep = isac::run_bcd(cfg, opt);
  } else if (mode == "bfwot") {
    rep = isac::run_baseline(isac::BaselineKind::Bfwot, cfg, opt);
  } else if (mode == "twobf") {
    rep = isac::run_baseline(isac::BaselineKind::Twobf, cfg, opt);
  } else {
    std::fprintf(stderr, "unknown --mode: %s\n", mode.c_str());
    return kExitUsage;
  }
  isac::write_run_results(rep, a.out);
  log_info("run: status=" + std::string(isac::status_name(rep.status)) +
           " sum_rate_bits=" + isac::format_double(rep.sum_rate_bits));
  return status_to_exit(rep.status);
}

int cmd_sweep(const CommonArgs& a, const std::string& axis,
              std::vector<double> values) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1]) {
      std::fprintf(stderr, "--values must be ascending\n");
      return kExitUsage;
    }
  const auto cfg = isac::load_scenario(a.scenario);
  isac::BcdOptions opt;
  opt.seed = a.seed;
  auto overrides = apply_overrides(a, opt);
  overrides["axis"] = axis;
  overrides["values"] = values;
  write_preamble("sweep", a, overrides);

  const auto ax = axis == "crb" ? isac::SweepAxis::CrbThreshold
                                : isac::SweepAxis::PowerBudget;
  const auto rows = isac::sweep(cfg, ax, values, opt);
  isac::write_trend_csv(
      rows, (std::filesystem::path(a.out) / "trend.csv").string());
  log_info("sweep: " + std::to_string(rows.size()) + " points written");
  bool any_feasible = false;
  for (const auto& r : rows)
    if (r.status != isac::RunStatus::Infeasible &&
        r.status != isac::RunStatus::Error)
      any_feasible = true;
  return any_feasible ? kExitOk : kExitInfeasible;
}

int cmd_plotdata(const std::string& results_dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(results_dir) / "result.json")) {
    std::fprintf(stderr, "no results found in: %s\n", results_dir.c_str());
    return kExitNoResults;
  }
  isac::emit_plot_data(results_dir);  // hash mismatch warns but still succeeds
  log_info("plotdata: trajectories.csv and convergence.csv written");
  return kExitOk;
}

int cmd_validate(const std::string& scenario) {
  const auto cfg = isac::load_scenario(scenario);
  isac::validate_scenario(cfg);
  log_info("validate: scenario ok");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint beamforming and trajectory simulation toolkit"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, plot_args, val_args;
  std::string mode = "proposed";
  std::string axis;
  std::vector<double> values;
  std::string results_dir;

  auto* run = app.add_subcommand("run", "single optimization run");
  add_common(run, run_args, true);
  run->add_option("--mode", mode, "proposed|twobf|bfwot");

  auto* sw = app.add_subcommand("sweep", "parameter sweep");
  add_common(sw, sweep_args, true);
  sw->add_option("--axis", axis, "crb|pmax")->required();
  sw->add_option("--values", values, "ascending grid values")->required();

  auto* plot = app.add_subcommand("plotdata", "emit plot-ready CSVs");
  plot->add_option("--results", results_dir, "results directory")->required();
  plot->add_option("--log-level", plot_args.log_level, "quiet|info|debug");

  auto* val = app.add_subcommand("validate", "check a scenario file");
  val->add_option("--scenario", val_args.scenario, "scenario JSON file")
      ->required();
  val->add_option("--log-level", val_args.log_level, "quiet|info|debug");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      apply_log_level(run_args);
      if (mode != "proposed" && mode != "twobf" && mode != "bfwot") {
        std::fprintf(stderr, "unknown --mode: %s\n", mode.c_str());
        return kExitUsage;
      }
      return cmd_run(run_args, mode);
    }
    if (sw->parsed()) {
      apply_log_level(sweep_args);
      if (axis != "crb" && axis != "pmax") {
        std::fprintf(stderr, "unknown --axis: %s\n", axis.c_str());
        return kExitUsage;
      }
      return cmd_sweep(sweep_args, axis, values);
    }
    if (plot->parsed()) {
      apply_log_level(plot_args);
      return cmd_plotdata(results_dir);
    }
    if (val->parsed()) {
      apply_log_level(val_args);
      return cmd_validate(val_args.scenario);
    }
  } catch (const isac::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitUsage;
}
