// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "isac/comm_beamforming.hpp"
#include "test_helpers.hpp"

using namespace isac;

namespace {

ChannelRealization unit_channels(const ScenarioConfig& cfg,
                                 const std::vector<Eigen::VectorXcd>& h_per_user) {
  const int m = cfg.array.antenna_count;
  const int n_slots = cfg.time_grid.slot_count;
  ChannelRealization ch;
  ch.uav_count = cfg.uav_count;
  ch.user_count = cfg.user_count();
  ch.slot_count = n_slots;
  ch.comm.assign(cfg.uav_count, {});
  ch.comm_los_prob.assign(cfg.uav_count, {});
  ch.echo.assign(cfg.uav_count, {});
  ch.echo_deriv.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
    ch.comm[u].assign(cfg.user_count(), std::vector<Eigen::VectorXcd>(n_slots + 1));
    ch.comm_los_prob[u].assign(cfg.user_count(),
                               std::vector<double>(n_slots + 1, 1.0));
    for (int v = 0; v < cfg.user_count(); ++v)
      for (int n = 0; n <= n_slots; ++n) ch.comm[u][v][n] = h_per_user[v];
    ch.echo[u].assign(cfg.targets_of(u), std::vector<EchoChannel>(n_slots + 1));
    ch.echo_deriv[u].assign(
        cfg.targets_of(u),
        std::vector<Eigen::MatrixXcd>(n_slots + 1, Eigen::MatrixXcd::Zero(m, m)));
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 0; n <= n_slots; ++n) {
        ch.echo[u][k][n].matrix = Eigen::MatrixXcd::Zero(m, m);
        ch.echo[u][k][n].beta = 1.0;
      }
  }
  return ch;
}

Eigen::VectorXcd basis(int m, int i, double scale = 1.0) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(m);
  v(i) = scale;
  return v;
}

BeamformerSet random_beams(const ScenarioConfig& cfg, std::uint64_t seed,
                           double comm_scale, double sense_scale) {
  auto b = BeamformerSet::zeros(cfg);
  std::mt19937_64 rng(seed);
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        b.comm[u][v][n] =
            comm_scale * circular_gaussian_vector(cfg.array.antenna_count, rng);
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        b.sense[u][k][n] =
            sense_scale * circular_gaussian_vector(cfg.array.antenna_count, rng);
  }
  b.lift_from_vectors();
  return b;
}

}  // namespace

TEST_CASE("update_chi recovers the exact SINR") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 0, 1);
  cfg.noise_power_dbm = 30.0;  // sigma^2 = 1
  const auto ch = unit_channels(cfg, {basis(3, 0)});
  auto b = BeamformerSet::zeros(cfg);
  b.comm[0][0][1] = basis(3, 0, std::sqrt(3.0));  // signal 3, Theta 1
  b.lift_from_vectors();
  auto st = make_fp_state(cfg);
  update_chi(st, b, ch, cfg);
  CHECK(st.chi[0][0][1] == Catch::Approx(3.0).epsilon(1e-12));
  update_psi(st, b, ch, cfg);
  CHECK(fp_objective(st, b, ch, cfg) ==
        Catch::Approx(cfg.time_grid.slot_length() * std::log2(4.0)).epsilon(1e-12));
}

TEST_CASE("update_chi with zero signal gives zero") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 0, 1);
  const auto ch = unit_channels(cfg, {basis(3, 0)});
  auto b = BeamformerSet::zeros(cfg);
  auto st = make_fp_state(cfg);
  update_chi(st, b, ch, cfg);
  CHECK(st.chi[0][0][1] == 0.0);
  update_psi(st, b, ch, cfg);
  CHECK(st.psi[0][0][1] == 0.0);
  CHECK(fp_objective(st, b, ch, cfg) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("chi matches independently computed SINRs on random instances") {
  const auto cfg = isac::testing::make_desk_scenario(2, 2, 1, 2, 3);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 17);
  const auto b = random_beams(cfg, 5, 0.3, 0.2);
  auto st = make_fp_state(cfg);
  update_chi(st, b, ch, cfg);
  const auto rates = compute_rates(b, ch, cfg);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        CHECK(st.chi[u][v][n] ==
              Catch::Approx(rates.entries[u][v][n].sinr).epsilon(1e-12));
}

TEST_CASE("auxiliary substitution recovers the sum rate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = isac::testing::make_desk_scenario(2, 2, 1, 2, seed + 1);
    const auto traj = straight_line_trajectory(cfg);
    const auto ch = sample_channels(cfg, traj, 100 + seed);
    const auto b = random_beams(cfg, seed, 0.25, 0.15);
    auto st = make_fp_state(cfg);
    update_chi(st, b, ch, cfg);
    update_psi(st, b, ch, cfg);
    const auto rates = compute_rates(b, ch, cfg);
    CHECK(fp_objective(st, b, ch, cfg) ==
          Catch::Approx(rates.sum_rate_bits).epsilon(1e-8));
  }
}

TEST_CASE("solve_G on a single isolated user recovers the MRT rate") {
  const auto cfg = isac::testing::make_desk_scenario(1, 1, 0, 1, 2);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 9);
  auto b = BeamformerSet::zeros(cfg);
  const auto st = run_alg1(b, ch, traj, cfg);
  const double expected = cfg.time_grid.slot_length() *
                          std::log2(1.0 + cfg.power_budget[0] *
                                              ch.h(0, 0, 1).squaredNorm() /
                                              cfg.noise_power());
  const auto rates = compute_rates(b, ch, cfg);
  CHECK(rates.sum_rate_bits == Catch::Approx(expected).epsilon(1e-4));
  CHECK(st.min_extraction_quality >= 0.99);
}

TEST_CASE("run_alg1 with zero power budget returns all-zero beams") {
  auto cfg = isac::testing::make_desk_scenario(1, 2, 0, 2);
  cfg.power_budget[0] = 0.0;
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 4);
  auto b = BeamformerSet::zeros(cfg);
  run_alg1(b, ch, traj, cfg);
  for (int v = 0; v < 2; ++v)
    for (int n = 1; n <= 2; ++n)
      CHECK(b.lifted_comm[0][v][n].cwiseAbs().maxCoeff() == 0.0);
  CHECK(compute_rates(b, ch, cfg).sum_rate_bits == 0.0);
}

TEST_CASE("solve_G on orthogonal users matches the brute-force power split") {
  auto cfg = isac::testing::make_desk_scenario(1, 2, 0, 1);
  cfg.noise_power_dbm = 30.0;  // sigma^2 = 1, so gains are O(1)
  const auto ch = unit_channels(cfg, {basis(3, 0), basis(3, 1)});
  const auto traj = straight_line_trajectory(cfg);
  auto b = BeamformerSet::zeros(cfg);
  run_alg1(b, ch, traj, cfg);
  const double got = compute_rates(b, ch, cfg).sum_rate_bits;
  double best = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double p1 = cfg.power_budget[0] * i / 1000.0;
    const double p2 = cfg.power_budget[0] - p1;
    best = std::max(best, std::log2(1.0 + p1) + std::log2(1.0 + p2));
  }
  best *= cfg.time_grid.slot_length();
  CHECK(got == Catch::Approx(best).epsilon(1e-3));
}

TEST_CASE("run_alg1 objective is monotone and converges on a desk scenario") {
  const auto cfg = isac::testing::make_desk_scenario(1, 2, 1, 3, 6);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 31);
  auto b = BeamformerSet::zeros(cfg);
  const auto st = run_alg1(b, ch, traj, cfg);
  REQUIRE(st.objective_trace.size() >= 3);
  for (std::size_t i = 1; i < st.objective_trace.size(); ++i)
    CHECK(st.objective_trace[i] >= st.objective_trace[i - 1] - 1e-6);
  CHECK(st.iterations <= 50);
  CHECK(st.min_extraction_quality >= 0.99);

  // chi fixed point: after the refresh, chi equals the realized SINR
  const auto rates = compute_rates(b, ch, cfg);
  for (int v = 0; v < 2; ++v)
    for (int n = 1; n <= 3; ++n)
      CHECK(st.chi[0][v][n] ==
            Catch::Approx(rates.entries[0][v][n].sinr).epsilon(1e-5));

  // budgets hold after extraction
  const auto led = compute_energy_ledger(b, traj, cfg);
  CHECK(led.margin[0] >= -1e-6 * cfg.energy_budget[0]);
  for (int n = 1; n <= 3; ++n) {
    double p = 0.0;
    for (int v = 0; v < 2; ++v) p += b.lifted_comm[0][v][n].trace().real();
    CHECK(p <= cfg.power_budget[0] * (1.0 + 1e-6));
  }
}

TEST_CASE("run_alg1 couples UAVs through inter-cell interference") {
  const auto cfg = isac::testing::make_desk_scenario(2, 1, 0, 2, 8);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 12);
  auto b = BeamformerSet::zeros(cfg);
  const auto st = run_alg1(b, ch, traj, cfg);
  for (std::size_t i = 1; i < st.objective_trace.size(); ++i)
    CHECK(st.objective_trace[i] >= st.objective_trace[i - 1] - 1e-6);
  CHECK(st.relaxed_objective >=
        st.extracted_objective - 1e-4 * std::abs(st.extracted_objective));
  CHECK(st.extracted_objective > 0.0);
}

TEST_CASE("run_alg1 restarted at its own solution stops immediately") {
  const auto cfg = isac::testing::make_desk_scenario(1, 2, 0, 2, 10);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 44);
  auto b = BeamformerSet::zeros(cfg);
  const auto first = run_alg1(b, ch, traj, cfg);
  Alg1Options opt;
  opt.init_if_zero = false;
  const auto second = run_alg1(b, ch, traj, cfg, opt);
  CHECK(second.iterations <= 2);
  CHECK(second.extracted_objective ==
        Catch::Approx(first.extracted_objective).epsilon(1e-3));
}
