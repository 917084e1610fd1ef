// SPDX-License-Identifier: Apache-2.0
//
// Result persistence: run manifests (JSON), versioned CSV metrics, and
// plot-ready trajectory / convergence dumps for a completed run directory.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/orchestrator.hpp"

namespace isac {

constexpr int kArtifactVersion = 1;

// ---------------------------------------------------------------------------
// small helpers

// Full-precision decimal formatting so result files round-trip bitwise.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string hash_file(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  return hash_hex(fnv1a64(bytes.data(), bytes.size()));
}

// Timestamp for manifests. Honors SOURCE_DATE_EPOCH so run directories can
// be byte-reproducible; falls back to the wall clock.
inline std::string manifest_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH"))
    t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
  std::tm tm{};
#if defined(_WIN32)
  gmtime_s(&tm, &t);
#else
  gmtime_r(&t, &tm);
#endif
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// run manifest

struct RunManifest {
  std::string command;        // e.g. "run" or "sweep"
  std::string scenario_path;  // as given on the command line
  std::string scenario_hash;  // fnv1a64 of the scenario file bytes, hex
  std::uint64_t seed = 0;
  nlohmann::json overrides = nlohmann::json::object();
  std::string created_utc;
  int artifact_version = kArtifactVersion;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["artifact_version"] = m.artifact_version;
  j["command"] = m.command;
  j["scenario_path"] = m.scenario_path;
  j["scenario_hash"] = m.scenario_hash;
  j["seed"] = m.seed;
  j["overrides"] = m.overrides;
  j["created_utc"] = m.created_utc;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.artifact_version = j.at("artifact_version").get<int>();
    m.command = j.at("command").get<std::string>();
    m.scenario_path = j.at("scenario_path").get<std::string>();
    m.scenario_hash = j.at("scenario_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.overrides = j.at("overrides");
    m.created_utc = j.at("created_utc").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  if (m.artifact_version != kArtifactVersion)
    throw SchemaError("manifest: unsupported artifact_version " +
                      std::to_string(m.artifact_version));
  return m;
}

// Written before any computation so a crashed run still identifies itself.
inline void write_manifest(const RunManifest& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw SchemaError("cannot write manifest in: " + dir);
  out << manifest_to_json(m).dump(2) << "\n";
}

inline RunManifest load_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  return manifest_from_json(detail::load_json(path.string()));
}

// ---------------------------------------------------------------------------
// versioned CSV files
//
// Every CSV starts with a comment line `# schema=<name>.v<version>` followed
// by a header row. Readers reject unknown schema lines.

struct CsvTable {
  std::string schema;  // e.g. "trend.v1"
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const CsvTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write csv: " + path);
  out << "# schema=" << t.schema << "\n";
  auto emit_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  };
  emit_row(t.header);
  for (const auto& row : t.rows) emit_row(row);
}

inline CsvTable read_csv(const std::string& path,
                         const std::string& expected_schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open csv: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0)
    throw SchemaError("csv missing schema line: " + path);
  t.schema = line.substr(9);
  if (t.schema != expected_schema)
    throw SchemaError("csv schema mismatch in " + path + ": got " + t.schema +
                      ", expected " + expected_schema);
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw SchemaError("csv missing header: " + path);
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

// ---------------------------------------------------------------------------
// concrete result files

inline void write_trend_csv(const std::vector<SweepRow>& rows,
                            const std::string& path) {
  CsvTable t;
  t.schema = "trend.v1";
  t.header = {"axis_value", "sum_rate_bits", "min_crb", "status"};
  for (const auto& r : rows) {
    const char* status = r.status == RunStatus::Converged       ? "converged"
                         : r.status == RunStatus::IterationLimit ? "iteration_limit"
                         : r.status == RunStatus::Infeasible     ? "infeasible"
                                                                 : "error";
    t.rows.push_back({format_double(r.axis_value),
                      format_double(r.sum_rate_bits), format_double(r.min_crb),
                      status});
  }
  write_csv(t, path);
}

inline void write_trajectories_csv(const TrajectorySet& traj,
                                   const std::string& path) {
  CsvTable t;
  t.schema = "trajectories.v1";
  t.header = {"slot", "uav", "x_m", "y_m", "altitude_m"};
  for (std::size_t u = 0; u < traj.positions.size(); ++u)
    for (std::size_t n = 0; n < traj.positions[u].size(); ++n) {
      const auto& p = traj.positions[u][n];
      t.rows.push_back({std::to_string(n), std::to_string(u),
                        format_double(p.x()), format_double(p.y()),
                        format_double(p.z())});
    }
  write_csv(t, path);
}

inline void write_convergence_csv(const std::vector<OuterIterationLog>& outer,
                                  const std::string& path) {
  CsvTable t;
  t.schema = "convergence.v1";
  t.header = {"outer_iteration", "sum_rate_bits", "min_crb_margin",
              "alg1_iterations", "alg2_iterations"};
  for (std::size_t i = 0; i < outer.size(); ++i)
    t.rows.push_back({std::to_string(i + 1),
                      format_double(outer[i].sum_rate_bits),
                      format_double(outer[i].min_crb_margin),
                      std::to_string(outer[i].alg1_iterations),
                      std::to_string(outer[i].alg2_iterations)});
  write_csv(t, path);
}

inline void write_comm_iterations_csv(const std::vector<FpState>& states,
                                      const std::string& path) {
  CsvTable t;
  t.schema = "comm_iterations.v1";
  t.header = {"outer_iteration", "objective_relaxed_bits",
              "objective_extracted_bits", "max_residual"};
  for (std::size_t i = 0; i < states.size(); ++i)
    t.rows.push_back({std::to_string(i + 1),
                      format_double(states[i].relaxed_objective),
                      format_double(states[i].extracted_objective),
                      format_double(states[i].max_residual)});
  write_csv(t, path);
}

inline void write_sensing_iterations_csv(const std::vector<ScaState>& states,
                                         const std::string& path) {
  CsvTable t;
  t.schema = "sensing_iterations.v1";
  t.header = {"outer_iteration", "objective_bits", "min_crb_margin",
              "max_residual"};
  for (std::size_t i = 0; i < states.size(); ++i)
    t.rows.push_back({std::to_string(i + 1),
                      format_double(states[i].extracted_objective),
                      format_double(states[i].min_crb_margin),
                      format_double(states[i].max_residual)});
  write_csv(t, path);
}

inline void write_training_csv(const std::vector<double>& reward,
                               const std::vector<int>& violations,
                               const std::string& path) {
  CsvTable t;
  t.schema = "training.v1";
  t.header = {"episode", "reward", "violations"};
  for (std::size_t i = 0; i < reward.size(); ++i)
    t.rows.push_back({std::to_string(i),
                      format_double(reward[i]),
                      std::to_string(i < violations.size() ? violations[i] : 0)});
  write_csv(t, path);
}

// ---------------------------------------------------------------------------
// whole-run persistence

inline const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::IterationLimit: return "iteration_limit";
    case RunStatus::Infeasible: return "infeasible";
    default: return "error";
  }
}

inline nlohmann::json report_to_json(const BcdReport& rep) {
  nlohmann::json j;
  j["status"] = status_name(rep.status);
  j["message"] = rep.message;
  j["sum_rate_bits"] = rep.sum_rate_bits;
  j["min_crb"] = rep.min_crb;
  if (std::isfinite(rep.rollout_reward))
    j["rollout_reward"] = rep.rollout_reward;
  j["kinematics_max_residual"] = rep.kinematics.max_residual();
  j["kinematics_feasible"] = rep.kinematics.feasible();
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& per_uav : rep.trajectory.positions) {
    nlohmann::json one = nlohmann::json::array();
    for (const auto& p : per_uav) one.push_back({p.x(), p.y(), p.z()});
    traj.push_back(one);
  }
  j["trajectory"] = traj;
  nlohmann::json outer = nlohmann::json::array();
  for (const auto& log : rep.outer) {
    nlohmann::json o;
    o["sum_rate_bits"] = log.sum_rate_bits;
    o["min_crb_margin"] = log.min_crb_margin;
    o["alg1_iterations"] = log.alg1_iterations;
    o["alg2_iterations"] = log.alg2_iterations;
    o["energy_margin"] = log.energy_margin;
    outer.push_back(o);
  }
  j["outer"] = outer;
  return j;
}

// Writes every result file for a finished run into `dir`.
inline void write_run_results(const BcdReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "result.json");
    if (!out) throw SchemaError("cannot write results in: " + dir);
    out << report_to_json(rep).dump(2) << "\n";
  }
  if (!rep.comm_states.empty())
    write_comm_iterations_csv(rep.comm_states,
                              (fs::path(dir) / "comm_iterations.csv").string());
  if (!rep.sense_states.empty())
    write_sensing_iterations_csv(
        rep.sense_states, (fs::path(dir) / "sensing_iterations.csv").string());
  if (!rep.episode_reward.empty())
    write_training_csv(rep.episode_reward, rep.episode_violations,
                       (fs::path(dir) / "training.csv").string());
}

// Re-reads result.json and emits the plot-ready CSVs. Returns false (with a
// warning on stderr) when the stored scenario no longer matches the manifest
// hash; the CSVs are still written.
inline bool emit_plot_data(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto result_path = fs::path(dir) / "result.json";
  if (!fs::exists(result_path))
    throw SchemaError("no result.json in: " + dir);
  const auto j = detail::load_json(result_path.string());

  bool hash_ok = true;
  const auto scenario_copy = fs::path(dir) / "scenario.json";
  if (fs::exists(fs::path(dir) / "manifest.json") && fs::exists(scenario_copy)) {
    const auto manifest = load_manifest(dir);
    if (hash_file(scenario_copy.string()) != manifest.scenario_hash) {
      std::fprintf(stderr,
                   "warning: scenario.json does not match the manifest hash\n");
      hash_ok = false;
    }
  }

  TrajectorySet traj;
  for (const auto& per_uav : j.at("trajectory")) {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& p : per_uav)
      pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                       p.at(2).get<double>());
    traj.positions.push_back(std::move(pts));
  }
  write_trajectories_csv(traj, (fs::path(dir) / "trajectories.csv").string());

  std::vector<OuterIterationLog> outer;
  for (const auto& o : j.at("outer")) {
    OuterIterationLog log;
    log.sum_rate_bits = o.at("sum_rate_bits").get<double>();
    log.min_crb_margin = o.at("min_crb_margin").get<double>();
    log.alg1_iterations = o.at("alg1_iterations").get<int>();
    log.alg2_iterations = o.at("alg2_iterations").get<int>();
    outer.push_back(log);
  }
  write_convergence_csv(outer, (fs::path(dir) / "convergence.csv").string());
  return hash_ok;
}

}  // namespace isac
