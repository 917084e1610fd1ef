// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "isac/scenario.hpp"
#include "test_helpers.hpp"

using namespace isac;
using isac::testing::data_path;
using isac::testing::make_desk_scenario;

TEST_CASE("load_scenario parses the default file") {
  const auto cfg = load_scenario(data_path("default_scenario.json"));
  CHECK(cfg.uav_count == 3);
  CHECK(cfg.array.antenna_count == 3);
  CHECK(cfg.los.alpha0_db == -70.0);
  CHECK(cfg.los.alpha0() == Catch::Approx(1e-7));
  CHECK(cfg.time_grid.slot_length() == Catch::Approx(1.0));
  CHECK(cfg.noise_power() == Catch::Approx(1e-14));
}

TEST_CASE("load_scenario rejects inconsistent altitude bounds") {
  auto j = scenario_to_json(load_scenario(data_path("default_scenario.json")));
  j["altitude_min_m"] = 300.0;
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("load_scenario rejects overlapping user partitions") {
  auto j = scenario_to_json(load_scenario(data_path("default_scenario.json")));
  j["user_partition"] = {{0, 1, 2}, {2, 3, 4}, {5, 6, 7}};
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("load_scenario reports schema errors with field names") {
  auto j = scenario_to_json(load_scenario(data_path("default_scenario.json")));
  j.erase("power_budget_w");
  try {
    scenario_from_json(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("power_budget_w") != std::string::npos);
  }
}

TEST_CASE("scenario save/load round trip is exact") {
  const auto cfg = load_scenario(data_path("default_scenario.json"));
  const auto j1 = scenario_to_json(cfg);
  const auto j2 = scenario_to_json(scenario_from_json(j1));
  CHECK(j1 == j2);
}

TEST_CASE("generate_random_scenario is deterministic") {
  const auto tmpl = load_scenario(data_path("default_scenario.json"));
  const auto a = generate_random_scenario(7, tmpl);
  const auto b = generate_random_scenario(7, tmpl);
  CHECK(scenario_to_json(a).dump() == scenario_to_json(b).dump());
  CHECK(scenario_to_json(a).dump() !=
        scenario_to_json(generate_random_scenario(8, tmpl)).dump());
}

TEST_CASE("generate_random_scenario respects documented ranges") {
  const auto tmpl = load_scenario(data_path("default_scenario.json"));
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto cfg = generate_random_scenario(seed, tmpl);
    for (int u = 0; u < cfg.uav_count; ++u) {
      CHECK(cfg.users_of(u) >= 3);
      CHECK(cfg.users_of(u) <= 5);
      CHECK(cfg.targets_of(u) >= 2);
      CHECK(cfg.targets_of(u) <= 4);
    }
    for (const auto& p : cfg.user_positions) {
      CHECK(p.x() >= 0.0);
      CHECK(p.x() <= 500.0);
      CHECK(p.y() >= 0.0);
      CHECK(p.y() <= 500.0);
      CHECK(p.z() == 0.0);
    }
    CHECK(cfg.start_position == tmpl.start_position);
    CHECK(cfg.final_position == tmpl.final_position);
  }
}

TEST_CASE("validate_kinematics: stationary trajectory at o_0 == o_f") {
  auto cfg = make_desk_scenario(1, 1, 1, 4);
  cfg.final_position = cfg.start_position;
  TrajectorySet traj;
  traj.positions.assign(1, std::vector<Eigen::Vector3d>(5, cfg.start_position));
  const auto r = validate_kinematics(traj, cfg);
  CHECK(r.endpoint_residual == 0.0);
  CHECK(r.step_residual == 0.0);
  CHECK(r.feasible());
}

TEST_CASE("validate_kinematics: coincident UAVs report the collision gap") {
  auto cfg = make_desk_scenario(2, 1, 1, 4);
  cfg.final_position = cfg.start_position;
  cfg.min_uav_distance = 10.0;
  TrajectorySet traj;
  traj.positions.assign(2, std::vector<Eigen::Vector3d>(5, cfg.start_position));
  const auto r = validate_kinematics(traj, cfg);
  CHECK(r.collision_residual == Catch::Approx(10.0));
}

TEST_CASE("validate_kinematics: overspeed step residual is the excess") {
  auto cfg = make_desk_scenario(1, 1, 1, 4);
  cfg.final_position = cfg.start_position;
  TrajectorySet traj;
  traj.positions.assign(1, std::vector<Eigen::Vector3d>(5, cfg.start_position));
  traj.positions[0][2] += Eigen::Vector3d(25.0, 0.0, 0.0);  // a_max*tau = 20
  const auto r = validate_kinematics(traj, cfg);
  CHECK(r.step_residual == Catch::Approx(5.0));
  CHECK(r.worst_step_slot == 2);
}

TEST_CASE("validate_kinematics rejects mismatched shapes") {
  const auto cfg = make_desk_scenario(2, 1, 1, 4);
  TrajectorySet traj;
  traj.positions.assign(1, std::vector<Eigen::Vector3d>(5, cfg.start_position));
  CHECK_THROWS_AS(validate_kinematics(traj, cfg), ValidationError);
}

TEST_CASE("straight_line_trajectory hits both endpoints and is feasible") {
  const auto cfg = make_desk_scenario(2, 2, 1, 6);
  const auto traj = straight_line_trajectory(cfg);
  const auto r = validate_kinematics(traj, cfg);
  CHECK(r.endpoint_residual <= 1e-12);
  CHECK(r.step_residual == 0.0);
  CHECK(r.altitude_residual == 0.0);
}
