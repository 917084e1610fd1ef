// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "isac/metrics.hpp"
#include "test_helpers.hpp"

using namespace isac;

namespace {

// Channel realization with hand-picked vectors so rate terms are exact.
ChannelRealization manual_channels(const ScenarioConfig& cfg) {
  const int m = cfg.array.antenna_count;
  const int n_slots = cfg.time_grid.slot_count;
  ChannelRealization ch;
  ch.uav_count = cfg.uav_count;
  ch.user_count = cfg.user_count();
  ch.slot_count = n_slots;
  ch.comm.assign(cfg.uav_count,
                 std::vector<std::vector<Eigen::VectorXcd>>(
                     cfg.user_count(),
                     std::vector<Eigen::VectorXcd>(n_slots + 1,
                                                   Eigen::VectorXcd::Zero(m))));
  ch.comm_los_prob.assign(
      cfg.uav_count, std::vector<std::vector<double>>(
                         cfg.user_count(), std::vector<double>(n_slots + 1, 1.0)));
  ch.echo.assign(cfg.uav_count, {});
  ch.echo_deriv.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
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

}  // namespace

TEST_CASE("compute_rates: orthogonal interferer gives a clean one-bit rate") {
  auto cfg = isac::testing::make_desk_scenario(1, 2, 1, 1);
  cfg.noise_power_dbm = 30.0;  // sigma^2 = 1 W
  auto ch = manual_channels(cfg);
  ch.comm[0][0][1] = basis(3, 0);
  ch.comm[0][1][1] = basis(3, 1);
  auto b = BeamformerSet::zeros(cfg);
  b.comm[0][0][1] = basis(3, 0);  // signal |h^H g|^2 = 1
  b.comm[0][1][1] = basis(3, 1);  // orthogonal to user 0's channel
  b.lift_from_vectors();
  const auto r = compute_rates(b, ch, cfg);
  CHECK(r.entries[0][0][1].signal == Catch::Approx(1.0));
  CHECK(r.entries[0][0][1].intra_interference == Catch::Approx(0.0).margin(1e-15));
  CHECK(r.entries[0][0][1].sinr == Catch::Approx(1.0));
  CHECK(r.entries[0][0][1].rate_bits == Catch::Approx(1.0));
  CHECK(r.entries[0][1][1].rate_bits == Catch::Approx(1.0));
  CHECK(r.sum_rate_bits == Catch::Approx(2.0));
  CHECK(r.slot_sum_rate(1) == Catch::Approx(2.0));
}

TEST_CASE("compute_rates: zero beamformers give zero rate") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 2);
  auto ch = manual_channels(cfg);
  ch.comm[0][0][1] = basis(3, 0);
  ch.comm[0][0][2] = basis(3, 0);
  const auto b = BeamformerSet::zeros(cfg);
  const auto r = compute_rates(b, ch, cfg);
  CHECK(r.sum_rate_bits == 0.0);
}

TEST_CASE("compute_rates: mixed interference reaches SINR 1.5") {
  auto cfg = isac::testing::make_desk_scenario(1, 2, 1, 1);
  cfg.noise_power_dbm = 30.0;
  auto ch = manual_channels(cfg);
  ch.comm[0][0][1] = basis(3, 0);
  ch.comm[0][1][1] = basis(3, 2);
  auto b = BeamformerSet::zeros(cfg);
  b.comm[0][0][1] = basis(3, 0, std::sqrt(1.5));
  b.comm[0][1][1] = basis(3, 2);
  b.lift_from_vectors();
  const auto r = compute_rates(b, ch, cfg);
  // user 0: signal 1.5, denominator = sigma^2 = 1
  CHECK(r.entries[0][0][1].sinr == Catch::Approx(1.5));
  CHECK(r.entries[0][0][1].rate_bits ==
        Catch::Approx(cfg.time_grid.slot_length() * std::log2(2.5)));
}

TEST_CASE("compute_theta matches the rate denominator") {
  auto cfg = isac::testing::make_desk_scenario(2, 2, 1, 2, 5);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 11);
  auto b = BeamformerSet::zeros(cfg);
  std::mt19937_64 rng(3);
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= 2; ++n)
        b.comm[u][v][n] = 0.3 * circular_gaussian_vector(3, rng);
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= 2; ++n)
        b.sense[u][k][n] = 0.2 * circular_gaussian_vector(3, rng);
  }
  b.lift_from_vectors();
  const auto r = compute_rates(b, ch, cfg);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= 2; ++n) {
        const auto& e = r.entries[u][v][n];
        const double theta = compute_theta(b, ch, cfg, u, v, n);
        CHECK(theta == Catch::Approx(e.intra_interference + e.inter_interference +
                                     cfg.noise_power())
                           .epsilon(1e-10));
        CHECK(e.sinr == Catch::Approx(e.signal / theta).epsilon(1e-10));
      }
}

TEST_CASE("compute_rates rejects non-Hermitian lifted beamformers") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 1);
  auto ch = manual_channels(cfg);
  ch.comm[0][0][1] = basis(3, 0);
  auto b = BeamformerSet::zeros(cfg);
  b.lifted_comm[0][0][1](0, 1) = Cplx(0.5, 0.0);
  CHECK_THROWS_AS(compute_rates(b, ch, cfg), ValidationError);
}

TEST_CASE("compute_crb scalar oracle") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 1);
  cfg.noise_power_dbm = 30.0;  // sigma^2 = 1
  auto ch = manual_channels(cfg);
  ch.echo_deriv[0][0][1] = Eigen::MatrixXcd::Identity(3, 3);
  ch.echo[0][0][1].beta = 0.5;
  auto b = BeamformerSet::zeros(cfg);
  b.sense[0][0][1] = basis(3, 0, std::sqrt(2.0));  // Tr(Abar^H Abar I) = 2
  b.lift_from_vectors();
  const auto r = compute_crb(b, ch, cfg);
  // sigma^2 / (2 beta^2 t) = 1 / (2 * 0.25 * 2) = 1
  CHECK(r.entries[0][0][1].trace_term == Catch::Approx(2.0));
  CHECK(r.entries[0][0][1].crb == Catch::Approx(1.0));
  CHECK(r.max_crb() == Catch::Approx(1.0));
}

TEST_CASE("compute_crb halves when sensing power doubles") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 1, 9);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 21);
  auto b = BeamformerSet::zeros(cfg);
  std::mt19937_64 rng(8);
  b.sense[0][0][1] = 0.5 * circular_gaussian_vector(3, rng);
  b.lift_from_vectors();
  const double crb1 = compute_crb(b, ch, cfg).entries[0][0][1].crb;
  b.sense[0][0][1] *= std::sqrt(2.0);
  b.lift_from_vectors();
  const double crb2 = compute_crb(b, ch, cfg).entries[0][0][1].crb;
  CHECK(crb2 == Catch::Approx(0.5 * crb1).epsilon(1e-10));
}

TEST_CASE("compute_crb reports infinity for zero sensing power") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 1);
  auto ch = manual_channels(cfg);
  ch.echo_deriv[0][0][1] = Eigen::MatrixXcd::Identity(3, 3);
  const auto b = BeamformerSet::zeros(cfg);
  const auto r = compute_crb(b, ch, cfg);
  CHECK(std::isinf(r.entries[0][0][1].crb));
}

TEST_CASE("compute_flight_energy: hover power is C0 + C1") {
  FlightPowerParams p;
  UavState hover{};  // zero speeds
  CHECK(compute_flight_energy(hover, p, 1.0) == Catch::Approx(887.2));
  CHECK(compute_flight_energy(hover, p, 0.5) == Catch::Approx(443.6));
}

TEST_CASE("compute_flight_energy: climb term is linear at C2 per m/s") {
  FlightPowerParams p;
  UavState climb{};
  climb.vertical_speed = 1.0;
  CHECK(compute_flight_energy(climb, p, 1.0) == Catch::Approx(887.2 + 11.5));
  climb.vertical_speed = -2.0;
  CHECK(compute_flight_energy(climb, p, 1.0) == Catch::Approx(887.2 - 23.0));
}

TEST_CASE("compute_flight_energy at 10 m/s matches the closed form") {
  FlightPowerParams p;
  UavState s{};
  s.horizontal_speed = 10.0;
  CHECK(compute_flight_energy(s, p, 1.0) ==
        Catch::Approx(853.64535750744).epsilon(1e-10));
  CHECK(compute_flight_energy(s, p, 2.0) ==
        Catch::Approx(2.0 * 853.64535750744).epsilon(1e-10));
}

TEST_CASE("compute_cs_energy sums traces times the slot length") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 1);
  auto b = BeamformerSet::zeros(cfg);
  b.comm[0][0][1] = basis(3, 0, std::sqrt(2.0));
  b.sense[0][0][1] = basis(3, 1);
  b.lift_from_vectors();
  const auto e = compute_cs_energy(b, cfg.time_grid.slot_length());
  CHECK(e[0][1] == Catch::Approx(3.0 * cfg.time_grid.slot_length()));
}

TEST_CASE("compute_energy_ledger: stationary hover plus transmit power") {
  auto cfg = isac::testing::make_desk_scenario(1, 1, 1, 4);
  cfg.final_position = cfg.start_position;
  TrajectorySet traj;
  traj.positions.assign(1, std::vector<Eigen::Vector3d>(5, cfg.start_position));
  auto b = BeamformerSet::zeros(cfg);
  for (int n = 1; n <= 4; ++n) b.comm[0][0][n] = basis(3, 0);  // 1 W each slot
  b.lift_from_vectors();
  const auto led = compute_energy_ledger(b, traj, cfg);
  CHECK(led.fl[0][1] == Catch::Approx(887.2));
  CHECK(led.total[0] == Catch::Approx(4.0 * (887.2 + 1.0)));
  CHECK(led.margin[0] == Catch::Approx(cfg.energy_budget[0] - led.total[0]));
}

TEST_CASE("rank_one_extract recovers an exact dyad") {
  Eigen::VectorXcd v(3);
  v << Cplx(2.0, 0.0), Cplx(1.0, 1.0), Cplx(0.0, -1.0);
  const Eigen::MatrixXcd x = v * v.adjoint();
  const auto r = rank_one_extract(x);
  CHECK(r.quality == Catch::Approx(1.0));
  CHECK((r.vector * r.vector.adjoint() - x).cwiseAbs().maxCoeff() < 1e-10);
  // global phase convention: first nonzero component real-positive
  CHECK(r.vector(0).imag() == Catch::Approx(0.0).margin(1e-12));
  CHECK(r.vector(0).real() > 0.0);
}

TEST_CASE("rank_one_extract quality on mixed-rank matrices") {
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(3, 3);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  CHECK(rank_one_extract(x).quality == Catch::Approx(0.5));
  x.setZero();
  x(0, 0) = 10.0;
  x(1, 1) = 0.15;
  const auto r = rank_one_extract(x);
  CHECK(r.quality == Catch::Approx(10.0 / 10.15));
  CHECK(std::abs(r.vector(0)) == Catch::Approx(std::sqrt(10.0)));
}

TEST_CASE("rank_one_extract rejects bad inputs") {
  Eigen::MatrixXcd nh = Eigen::MatrixXcd::Zero(2, 2);
  nh(0, 1) = Cplx(1.0, 0.0);
  CHECK_THROWS_AS(rank_one_extract(nh), NumericalError);
  Eigen::MatrixXcd indef = Eigen::MatrixXcd::Identity(2, 2);
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(rank_one_extract(indef), NumericalError);
}

TEST_CASE("rank_one_extract of the zero matrix has zero quality") {
  const auto r = rank_one_extract(Eigen::MatrixXcd::Zero(3, 3));
  CHECK(r.quality == 0.0);
  CHECK(r.vector.norm() == 0.0);
}
