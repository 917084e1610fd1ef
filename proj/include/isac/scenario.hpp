// SPDX-License-Identifier: Apache-2.0
//
// Experiment scenario definition: physical constants, node partitions,
// budgets, validation, JSON (de)serialization and random generation.
#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "isac/common.hpp"

namespace isac {

struct TimeGrid {
  double total_duration = 0.0;  // T, seconds
  int slot_count = 0;           // N

  double slot_length() const { return total_duration / slot_count; }  // tau
};

struct ArrayGeometry {
  int antenna_count = 1;         // M
  double wavelength = 0.125;     // meters
  double element_spacing = 0.0625;  // meters
};

struct LosModelParams {
  double c = 11.95;           // environment constant C, dimensionless
  double d_per_degree = 0.136;  // environment constant D
  double alpha0_db = -70.0;   // path gain at 1 m, as given in the file
  double kappa = 0.2;         // NLoS sensing factor

  double alpha0() const { return db_to_linear(alpha0_db); }
};

struct FlightPowerParams {
  double c0 = 798.6;           // induced power at hover, W
  double c1 = 88.6;            // blade profile power at hover, W
  double c2 = 11.5;            // climb/descent power, W per (m/s)
  double tip_speed = 120.0;    // U_tip, m/s
  double psi0 = 0.6;           // fuselage drag ratio
  double rotor_solidity = 0.005;   // r~
  double air_density = 1.226;  // kg/m^3
  double rotor_disc_area = 0.503;  // m^2
  double hover_speed = 4.3;    // a0, m/s
};

// Per-slot kinematic state of one UAV.
struct UavState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double horizontal_speed = 0.0;  // m/s
  double heading = 0.0;           // radians
  double vertical_speed = 0.0;    // m/s, |dH|/tau
};

struct ScenarioConfig {
  int schema_version = 1;
  std::uint64_t rng_seed = 0;

  TimeGrid time_grid;
  ArrayGeometry array;
  LosModelParams los;
  FlightPowerParams flight;

  int uav_count = 0;
  std::vector<std::vector<int>> user_partition;    // global user ids per UAV
  std::vector<std::vector<int>> target_partition;  // global target ids per UAV
  std::vector<Eigen::Vector3d> user_positions;     // z = 0
  std::vector<Eigen::Vector3d> target_positions;   // z = 0
  // Optional per-slot target positions, [n][global target]; targets are
  // static when absent.
  std::optional<std::vector<std::vector<Eigen::Vector3d>>> target_positions_per_slot;

  Eigen::Vector3d start_position = Eigen::Vector3d::Zero();  // o_0
  Eigen::Vector3d final_position = Eigen::Vector3d::Zero();  // o_f

  std::vector<double> power_budget;   // P_max per UAV, W
  std::vector<double> energy_budget;  // E_th per UAV, J
  std::vector<std::vector<double>> crb_threshold;  // Gamma, [u][local k], rad^2

  double max_speed = 20.0;        // a_max, m/s
  double altitude_min = 150.0;    // H_min, m
  double altitude_max = 200.0;    // H_max, m
  double min_uav_distance = 10.0; // d_min, m
  double noise_power_dbm = -110.0;
  std::vector<double> rcs_dbsqm;  // sigma_k per global target
  double area_size = 500.0;       // square side, m

  int user_count() const { return static_cast<int>(user_positions.size()); }
  int target_count() const { return static_cast<int>(target_positions.size()); }
  int users_of(int u) const { return static_cast<int>(user_partition[u].size()); }
  int targets_of(int u) const { return static_cast<int>(target_partition[u].size()); }
  int user_id(int u, int v) const { return user_partition[u][v]; }
  int target_id(int u, int k) const { return target_partition[u][k]; }

  double noise_power() const { return db_to_linear(noise_power_dbm) * 1e-3; }  // W
  double rcs(int global_k) const { return db_to_linear(rcs_dbsqm[global_k]); } // m^2
  double gamma(int u, int k, int /*n*/) const { return crb_threshold[u][k]; }

  Eigen::Vector3d target_position(int global_k, int n) const {
    if (target_positions_per_slot) return (*target_positions_per_slot)[n][global_k];
    return target_positions[global_k];
  }
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

inline void check_partition(const std::vector<std::vector<int>>& part,
                            int total, const std::string& what) {
  std::set<int> seen;
  for (const auto& group : part) {
    for (int id : group) {
      require(id >= 0 && id < total, what + " partition references id " +
                                         std::to_string(id) + " out of range");
      require(seen.insert(id).second,
              what + " partitions overlap at id " + std::to_string(id));
    }
  }
  require(static_cast<int>(seen.size()) == total,
          what + " partitions do not exhaust the global set");
}

}  // namespace detail

inline void validate_scenario(const ScenarioConfig& cfg) {
  using detail::require;
  require(cfg.time_grid.slot_count >= 1, "time_grid.slot_count must be >= 1");
  require(cfg.time_grid.total_duration > 0, "time_grid.total_duration must be > 0");
  require(cfg.array.antenna_count >= 1, "array.antenna_count must be >= 1");
  require(cfg.array.wavelength > 0, "array.wavelength must be > 0");
  require(cfg.array.element_spacing > 0, "array.element_spacing must be > 0");
  require(cfg.los.c > 0 && cfg.los.d_per_degree > 0, "los constants must be > 0");
  require(cfg.los.kappa >= 0, "los.kappa must be >= 0");
  require(cfg.flight.c0 > 0 && cfg.flight.c1 > 0 && cfg.flight.c2 > 0 &&
              cfg.flight.tip_speed > 0 && cfg.flight.psi0 > 0 &&
              cfg.flight.rotor_solidity > 0 && cfg.flight.air_density > 0 &&
              cfg.flight.rotor_disc_area > 0 && cfg.flight.hover_speed > 0,
          "flight power parameters must all be > 0");
  require(cfg.uav_count >= 1, "uav_count must be >= 1");
  require(static_cast<int>(cfg.user_partition.size()) == cfg.uav_count,
          "user_partition must have one entry per UAV");
  require(static_cast<int>(cfg.target_partition.size()) == cfg.uav_count,
          "target_partition must have one entry per UAV");
  detail::check_partition(cfg.user_partition, cfg.user_count(), "user");
  detail::check_partition(cfg.target_partition, cfg.target_count(), "target");
  for (const auto& p : cfg.user_positions)
    require(p.z() == 0.0, "user positions must have zero altitude");
  for (const auto& p : cfg.target_positions)
    require(p.z() == 0.0, "target positions must have zero altitude");
  require(cfg.altitude_min <= cfg.altitude_max, "altitude_min must be <= altitude_max");
  require(static_cast<int>(cfg.power_budget.size()) == cfg.uav_count,
          "power_budget must have one entry per UAV");
  require(static_cast<int>(cfg.energy_budget.size()) == cfg.uav_count,
          "energy_budget must have one entry per UAV");
  for (double p : cfg.power_budget) require(p > 0, "power budgets must be > 0");
  for (double e : cfg.energy_budget) require(e > 0, "energy budgets must be > 0");
  require(static_cast<int>(cfg.crb_threshold.size()) == cfg.uav_count,
          "crb_threshold must have one entry per UAV");
  for (int u = 0; u < cfg.uav_count; ++u) {
    require(static_cast<int>(cfg.crb_threshold[u].size()) == cfg.targets_of(u),
            "crb_threshold[" + std::to_string(u) + "] must have one entry per target");
    for (double g : cfg.crb_threshold[u]) require(g > 0, "crb thresholds must be > 0");
  }
  require(static_cast<int>(cfg.rcs_dbsqm.size()) == cfg.target_count(),
          "rcs_dbsqm must have one entry per target");
  require(cfg.max_speed > 0, "max_speed must be > 0");
  require(cfg.min_uav_distance >= 0, "min_uav_distance must be >= 0");
  require(cfg.start_position.z() >= cfg.altitude_min &&
              cfg.start_position.z() <= cfg.altitude_max,
          "start altitude must lie within [altitude_min, altitude_max]");
  require(cfg.final_position.z() >= cfg.altitude_min &&
              cfg.final_position.z() <= cfg.altitude_max,
          "final altitude must lie within [altitude_min, altitude_max]");
  const double reach = cfg.time_grid.slot_count * cfg.max_speed *
                       cfg.time_grid.slot_length();
  require((cfg.final_position - cfg.start_position).norm() <= reach,
          "final position unreachable within the time grid at max_speed");
  if (cfg.target_positions_per_slot) {
    require(static_cast<int>(cfg.target_positions_per_slot->size()) ==
                cfg.time_grid.slot_count + 1,
            "target_positions_per_slot must cover slots 0..N");
    for (const auto& slot : *cfg.target_positions_per_slot)
      require(static_cast<int>(slot.size()) == cfg.target_count(),
              "target_positions_per_slot rows must list every target");
  }
}

// ---------------------------------------------------------------------------
// JSON schema (version 1). Angles in degrees, gains in dB / dBsqm in files;
// everything is converted to linear/SI on load.

namespace detail {

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("scenario parse failure in " + path + ": " + e.what());
  }
  return j;
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key,
            const std::string& path) {
  if (!j.contains(key)) throw SchemaError("missing field: " + path + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("bad field " + path + key + ": " + e.what());
  }
}

inline Eigen::Vector3d to_vec3(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(where + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json from_vec3(const Eigen::Vector3d& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using detail::get_field;
  ScenarioConfig cfg;
  cfg.schema_version = get_field<int>(j, "schema_version", "");
  if (cfg.schema_version != 1)
    throw SchemaError("unsupported schema_version " +
                      std::to_string(cfg.schema_version));
  cfg.rng_seed = get_field<std::uint64_t>(j, "rng_seed", "");

  const auto tg = get_field<nlohmann::json>(j, "time_grid", "");
  cfg.time_grid.total_duration = get_field<double>(tg, "total_duration_s", "time_grid.");
  cfg.time_grid.slot_count = get_field<int>(tg, "slot_count", "time_grid.");

  const auto ar = get_field<nlohmann::json>(j, "array", "");
  cfg.array.antenna_count = get_field<int>(ar, "antenna_count", "array.");
  cfg.array.wavelength = get_field<double>(ar, "wavelength_m", "array.");
  cfg.array.element_spacing = get_field<double>(ar, "element_spacing_m", "array.");

  const auto los = get_field<nlohmann::json>(j, "los", "");
  cfg.los.c = get_field<double>(los, "c", "los.");
  cfg.los.d_per_degree = get_field<double>(los, "d_per_degree", "los.");
  cfg.los.alpha0_db = get_field<double>(los, "alpha0_db", "los.");
  cfg.los.kappa = get_field<double>(los, "kappa", "los.");

  // The schema uses descriptive names for the rotor-power coefficients
  // instead of single letters, avoiding a collision with the lifted
  // beamformer G.
  const auto fl = get_field<nlohmann::json>(j, "flight", "");
  cfg.flight.c0 = get_field<double>(fl, "c0_w", "flight.");
  cfg.flight.c1 = get_field<double>(fl, "c1_w", "flight.");
  cfg.flight.c2 = get_field<double>(fl, "c2_w_per_mps", "flight.");
  cfg.flight.tip_speed = get_field<double>(fl, "tip_speed_mps", "flight.");
  cfg.flight.psi0 = get_field<double>(fl, "psi0", "flight.");
  cfg.flight.rotor_solidity = get_field<double>(fl, "rotor_solidity", "flight.");
  cfg.flight.air_density = get_field<double>(fl, "air_density_kg_m3", "flight.");
  cfg.flight.rotor_disc_area = get_field<double>(fl, "rotor_disc_area_m2", "flight.");
  cfg.flight.hover_speed = get_field<double>(fl, "hover_speed_mps", "flight.");

  cfg.uav_count = get_field<int>(j, "uav_count", "");
  cfg.user_partition = get_field<std::vector<std::vector<int>>>(j, "user_partition", "");
  cfg.target_partition =
      get_field<std::vector<std::vector<int>>>(j, "target_partition", "");

  for (const auto& p : get_field<nlohmann::json>(j, "user_positions", ""))
    cfg.user_positions.push_back(detail::to_vec3(p, "user_positions entry"));
  for (const auto& p : get_field<nlohmann::json>(j, "target_positions", ""))
    cfg.target_positions.push_back(detail::to_vec3(p, "target_positions entry"));
  if (j.contains("target_positions_per_slot")) {
    std::vector<std::vector<Eigen::Vector3d>> per_slot;
    for (const auto& row : j.at("target_positions_per_slot")) {
      std::vector<Eigen::Vector3d> slot;
      for (const auto& p : row)
        slot.push_back(detail::to_vec3(p, "target_positions_per_slot entry"));
      per_slot.push_back(std::move(slot));
    }
    cfg.target_positions_per_slot = std::move(per_slot);
  }

  cfg.start_position = detail::to_vec3(get_field<nlohmann::json>(j, "start_position", ""),
                                       "start_position");
  cfg.final_position = detail::to_vec3(get_field<nlohmann::json>(j, "final_position", ""),
                                       "final_position");

  cfg.power_budget = get_field<std::vector<double>>(j, "power_budget_w", "");
  cfg.energy_budget = get_field<std::vector<double>>(j, "energy_budget_j", "");

  // crb_threshold_rad2 may be a scalar (uniform over u, k) or a nested list.
  const auto& crb = j.contains("crb_threshold_rad2")
                        ? j.at("crb_threshold_rad2")
                        : throw SchemaError("missing field: crb_threshold_rad2");
  if (crb.is_number()) {
    for (int u = 0; u < cfg.uav_count; ++u)
      cfg.crb_threshold.emplace_back(cfg.target_partition[u].size(),
                                     crb.get<double>());
  } else {
    cfg.crb_threshold = crb.get<std::vector<std::vector<double>>>();
  }

  cfg.max_speed = get_field<double>(j, "max_speed_mps", "");
  cfg.altitude_min = get_field<double>(j, "altitude_min_m", "");
  cfg.altitude_max = get_field<double>(j, "altitude_max_m", "");
  cfg.min_uav_distance = get_field<double>(j, "min_uav_distance_m", "");
  cfg.noise_power_dbm = get_field<double>(j, "noise_power_dbm", "");
  const auto& rcs = j.contains("rcs_dbsqm")
                        ? j.at("rcs_dbsqm")
                        : throw SchemaError("missing field: rcs_dbsqm");
  if (rcs.is_number()) {
    cfg.rcs_dbsqm.assign(cfg.target_positions.size(), rcs.get<double>());
  } else {
    cfg.rcs_dbsqm = rcs.get<std::vector<double>>();
  }
  if (j.contains("area_size_m")) cfg.area_size = j.at("area_size_m").get<double>();

  validate_scenario(cfg);
  return cfg;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = cfg.schema_version;
  j["rng_seed"] = cfg.rng_seed;
  j["time_grid"] = {{"total_duration_s", cfg.time_grid.total_duration},
                    {"slot_count", cfg.time_grid.slot_count}};
  j["array"] = {{"antenna_count", cfg.array.antenna_count},
                {"wavelength_m", cfg.array.wavelength},
                {"element_spacing_m", cfg.array.element_spacing}};
  j["los"] = {{"c", cfg.los.c},
              {"d_per_degree", cfg.los.d_per_degree},
              {"alpha0_db", cfg.los.alpha0_db},
              {"kappa", cfg.los.kappa}};
  j["flight"] = {{"c0_w", cfg.flight.c0},
                 {"c1_w", cfg.flight.c1},
                 {"c2_w_per_mps", cfg.flight.c2},
                 {"tip_speed_mps", cfg.flight.tip_speed},
                 {"psi0", cfg.flight.psi0},
                 {"rotor_solidity", cfg.flight.rotor_solidity},
                 {"air_density_kg_m3", cfg.flight.air_density},
                 {"rotor_disc_area_m2", cfg.flight.rotor_disc_area},
                 {"hover_speed_mps", cfg.flight.hover_speed}};
  j["uav_count"] = cfg.uav_count;
  j["user_partition"] = cfg.user_partition;
  j["target_partition"] = cfg.target_partition;
  j["user_positions"] = nlohmann::json::array();
  for (const auto& p : cfg.user_positions)
    j["user_positions"].push_back(detail::from_vec3(p));
  j["target_positions"] = nlohmann::json::array();
  for (const auto& p : cfg.target_positions)
    j["target_positions"].push_back(detail::from_vec3(p));
  if (cfg.target_positions_per_slot) {
    auto rows = nlohmann::json::array();
    for (const auto& slot : *cfg.target_positions_per_slot) {
      auto row = nlohmann::json::array();
      for (const auto& p : slot) row.push_back(detail::from_vec3(p));
      rows.push_back(row);
    }
    j["target_positions_per_slot"] = rows;
  }
  j["start_position"] = detail::from_vec3(cfg.start_position);
  j["final_position"] = detail::from_vec3(cfg.final_position);
  j["power_budget_w"] = cfg.power_budget;
  j["energy_budget_j"] = cfg.energy_budget;
  j["crb_threshold_rad2"] = cfg.crb_threshold;
  j["max_speed_mps"] = cfg.max_speed;
  j["altitude_min_m"] = cfg.altitude_min;
  j["altitude_max_m"] = cfg.altitude_max;
  j["min_uav_distance_m"] = cfg.min_uav_distance;
  j["noise_power_dbm"] = cfg.noise_power_dbm;
  j["rcs_dbsqm"] = cfg.rcs_dbsqm;
  j["area_size_m"] = cfg.area_size;
  return j;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  return scenario_from_json(detail::load_json(path));
}

inline void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write scenario file: " + path);
  out << scenario_to_json(cfg).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Random scenario generation (positions uniform in the square area, node
// counts drawn from the simulation-parameter ranges, shared endpoints).

inline ScenarioConfig generate_random_scenario(std::uint64_t seed,
                                               const ScenarioConfig& tmpl) {
  validate_scenario(tmpl);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> users_dist(3, 5);
  std::uniform_int_distribution<int> targets_dist(2, 4);
  std::uniform_real_distribution<double> pos(0.0, tmpl.area_size);

  ScenarioConfig cfg = tmpl;
  cfg.rng_seed = seed;
  cfg.user_partition.clear();
  cfg.target_partition.clear();
  cfg.user_positions.clear();
  cfg.target_positions.clear();
  cfg.target_positions_per_slot.reset();
  cfg.crb_threshold.clear();
  cfg.rcs_dbsqm.clear();

  const double gamma0 = tmpl.crb_threshold[0][0];
  const double rcs0 = tmpl.rcs_dbsqm[0];
  int next_user = 0, next_target = 0;
  for (int u = 0; u < cfg.uav_count; ++u) {
    const int vu = users_dist(rng);
    const int ku = targets_dist(rng);
    std::vector<int> users(vu), targets(ku);
    for (int v = 0; v < vu; ++v) {
      users[v] = next_user++;
      cfg.user_positions.emplace_back(pos(rng), pos(rng), 0.0);
    }
    for (int k = 0; k < ku; ++k) {
      targets[k] = next_target++;
      cfg.target_positions.emplace_back(pos(rng), pos(rng), 0.0);
      cfg.rcs_dbsqm.push_back(rcs0);
    }
    cfg.user_partition.push_back(std::move(users));
    cfg.target_partition.push_back(std::move(targets));
    cfg.crb_threshold.emplace_back(ku, gamma0);
  }
  validate_scenario(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Trajectories and kinematic constraint checking.

struct TrajectorySet {
  // positions[u][n], n = 0..N (N+1 waypoints, slot n covers the move
  // from n-1 to n).
  std::vector<std::vector<Eigen::Vector3d>> positions;

  int uav_count() const { return static_cast<int>(positions.size()); }
  int slot_count() const {
    return positions.empty() ? 0 : static_cast<int>(positions[0].size()) - 1;
  }

  UavState state_at(int u, int n, double tau) const {
    UavState s;
    s.position = positions[u][n];
    if (n >= 1) {
      const Eigen::Vector3d d = positions[u][n] - positions[u][n - 1];
      s.horizontal_speed = std::hypot(d.x(), d.y()) / tau;
      s.heading = (d.x() == 0.0 && d.y() == 0.0) ? 0.0 : std::atan2(d.y(), d.x());
      s.vertical_speed = std::abs(d.z()) / tau;
    }
    return s;
  }
};

inline TrajectorySet straight_line_trajectory(const ScenarioConfig& cfg) {
  TrajectorySet t;
  const int n_slots = cfg.time_grid.slot_count;
  t.positions.assign(cfg.uav_count, std::vector<Eigen::Vector3d>(n_slots + 1));
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int n = 0; n <= n_slots; ++n) {
      const double f = static_cast<double>(n) / n_slots;
      t.positions[u][n] = (1.0 - f) * cfg.start_position + f * cfg.final_position;
    }
  return t;
}

struct KinematicsReport {
  double step_residual = 0.0;      // max over (u,n) of ||step|| - a_max*tau
  double endpoint_residual = 0.0;  // max endpoint mismatch, m
  double altitude_residual = 0.0;  // max excursion outside [H_min, H_max]
  double collision_residual = 0.0; // max of d_min - pairwise distance
  int worst_step_uav = -1, worst_step_slot = -1;

  double max_residual() const {
    return std::max({step_residual, endpoint_residual, altitude_residual,
                     collision_residual});
  }
  bool feasible(double tol = 1e-9) const { return max_residual() <= tol; }
};

// Residuals for constraints (8e)-(8h). The pairwise-distance check skips
// slots 0 and N: all UAVs share o_0 and o_f by constraint, so the endpoints
// are exempt from the separation requirement.
inline KinematicsReport validate_kinematics(const TrajectorySet& traj,
                                            const ScenarioConfig& cfg) {
  const int n_slots = cfg.time_grid.slot_count;
  if (traj.uav_count() != cfg.uav_count || traj.slot_count() != n_slots)
    throw ValidationError("trajectory shape does not match the scenario");
  const double tau = cfg.time_grid.slot_length();
  const double step_max = cfg.max_speed * tau;

  KinematicsReport r;
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int n = 1; n <= n_slots; ++n) {
      const double step = (traj.positions[u][n] - traj.positions[u][n - 1]).norm();
      if (step - step_max > r.step_residual) {
        r.step_residual = step - step_max;
        r.worst_step_uav = u;
        r.worst_step_slot = n;
      }
    }
    r.endpoint_residual = std::max(
        {r.endpoint_residual, (traj.positions[u][0] - cfg.start_position).norm(),
         (traj.positions[u][n_slots] - cfg.final_position).norm()});
    for (int n = 0; n <= n_slots; ++n) {
      const double h = traj.positions[u][n].z();
      r.altitude_residual = std::max({r.altitude_residual, cfg.altitude_min - h,
                                      h - cfg.altitude_max});
    }
  }
  for (int n = 1; n < n_slots; ++n)
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int w = u + 1; w < cfg.uav_count; ++w) {
        const double dist = (traj.positions[u][n] - traj.positions[w][n]).norm();
        r.collision_residual =
            std::max(r.collision_residual, cfg.min_uav_distance - dist);
      }
  r.step_residual = std::max(0.0, r.step_residual);
  r.collision_residual = std::max(0.0, r.collision_residual);
  r.altitude_residual = std::max(0.0, r.altitude_residual);
  return r;
}

}  // namespace isac
