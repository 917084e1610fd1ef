// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "isac/channel.hpp"
#include "test_helpers.hpp"

using namespace isac;

namespace {
const LosModelParams kLos{11.95, 0.136, -70.0, 0.2};
const ArrayGeometry kArray{3, 0.125, 0.0625};
}  // namespace

TEST_CASE("los_probability reference values") {
  CHECK(los_probability(11.95, kLos) == Catch::Approx(1.0 / 12.95).epsilon(1e-9));
  CHECK(los_probability(90.0, kLos) == Catch::Approx(0.99971).margin(1e-5));
  CHECK(los_probability(0.0, kLos) == Catch::Approx(0.016207).margin(1e-6));
  CHECK_THROWS_AS(los_probability(-1.0, kLos), ValidationError);
  CHECK_THROWS_AS(los_probability(90.5, kLos), ValidationError);
}

TEST_CASE("los_probability is monotone increasing and maps into (0,1)") {
  double prev = 0.0;
  for (int i = 0; i <= 90; ++i) {
    const double p = los_probability(static_cast<double>(i), kLos);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
}

TEST_CASE("steering_vector reference values") {
  const auto a0 = steering_vector(0.0, kArray);
  for (int m = 0; m < 3; ++m) CHECK(std::abs(a0(m) - Cplx(1, 0)) < 1e-12);

  ArrayGeometry two{2, 0.125, 0.0625};
  const auto a90 = steering_vector(kPi / 2.0, two);
  CHECK(std::abs(a90(0) - Cplx(1, 0)) < 1e-12);
  CHECK(std::abs(a90(1) - Cplx(-1, 0)) < 1e-12);

  const auto a30 = steering_vector(deg_to_rad(30.0), two);
  CHECK(std::abs(a30(1) - Cplx(0, -1)) < 1e-12);
}

TEST_CASE("steering_vector has norm^2 = M for all angles") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phi(-kPi / 2, kPi / 2);
  for (int i = 0; i < 20; ++i) {
    const auto a = steering_vector(phi(rng), kArray);
    CHECK(a.squaredNorm() == Catch::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("steering_derivative matches central finite differences") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(-1.2, 1.2);
  const double h = 1e-6;
  for (int i = 0; i < 20; ++i) {
    const double phi = i == 0 ? 0.3 : dist(rng);
    const auto da = steering_derivative(phi, kArray);
    const auto fd = ((steering_vector(phi + h, kArray) -
                      steering_vector(phi - h, kArray)) /
                     (2.0 * h))
                        .eval();
    CHECK((da - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("steering_derivative edge cases") {
  ArrayGeometry one{1, 0.125, 0.0625};
  CHECK(std::abs(steering_derivative(0.7, one)(0)) == 0.0);
  const auto da = steering_derivative(kPi / 2.0, kArray);
  CHECK(da.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_comm_channel: pure LoS collapses to the steering vector") {
  LosModelParams los = kLos;
  los.c = 1e-30;  // Pr_LoS -> 1 for any elevation
  const auto geo = link_geometry({0, 0, 175}, {100, 0, 0});
  std::mt19937_64 rng(1);
  const auto h = sample_comm_channel(geo, los, kArray, rng);
  const Eigen::VectorXcd expect = (std::sqrt(los.alpha0()) / geo.slant_distance) *
                                  steering_vector(geo.elevation_rad(), kArray);
  CHECK((h - expect).cwiseAbs().maxCoeff() < 1e-9 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("sample_comm_channel is deterministic given the rng state") {
  const auto geo = link_geometry({50, 20, 160}, {0, 0, 0});
  std::mt19937_64 a(42), b(42);
  const auto h1 = sample_comm_channel(geo, kLos, kArray, a);
  const auto h2 = sample_comm_channel(geo, kLos, kArray, b);
  CHECK(h1 == h2);
}

TEST_CASE("sample_comm_channel second moment matches the closed form") {
  std::mt19937_64 geo_rng(9);
  std::uniform_real_distribution<double> xy(10.0, 400.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto geo =
        link_geometry({xy(geo_rng), xy(geo_rng), 175.0}, {xy(geo_rng), xy(geo_rng), 0.0});
    // E||h||^2 = a0 d^-2 (Pr M + (1-Pr) M) = a0 d^-2 M
    const double expect = kLos.alpha0() * 3.0 /
                          (geo.slant_distance * geo.slant_distance);
    std::mt19937_64 rng(100 + trial);
    double acc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
      acc += sample_comm_channel(geo, kLos, kArray, rng).squaredNorm();
    CHECK(acc / draws == Catch::Approx(expect).epsilon(0.01));
  }
}

TEST_CASE("sample_echo_channel: pure LoS is the rank-one dyad") {
  LosModelParams los = kLos;
  los.c = 1e-30;
  los.kappa = 0.0;
  const auto geo = link_geometry({0, 0, 175}, {80, 60, 0});
  std::mt19937_64 rng(5);
  const double rcs = 0.02;
  const auto e = sample_echo_channel(geo, rcs, los, kArray, rng);
  CHECK(e.beta == Catch::Approx(rcs / (2.0 * geo.slant_distance)));
  CHECK(e.matrix.trace().real() == Catch::Approx(e.beta * 3.0).epsilon(1e-9));
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(e.matrix);
  CHECK(svd.singularValues()(1) < 1e-9 * svd.singularValues()(0));
}

TEST_CASE("sample_echo_channel: beta scales linearly with the cross-section") {
  const auto geo = link_geometry({0, 0, 175}, {80, 60, 0});
  std::mt19937_64 a(7), b(7);
  const auto e1 = sample_echo_channel(geo, 0.01, kLos, kArray, a);
  const auto e2 = sample_echo_channel(geo, 0.02, kLos, kArray, b);
  CHECK(e2.beta == Catch::Approx(2.0 * e1.beta));
  CHECK((e2.matrix - 2.0 * e1.matrix).cwiseAbs().maxCoeff() <
        1e-12 * e1.matrix.cwiseAbs().maxCoeff());
}

TEST_CASE("sample_echo_channel: kappa = 0 removes the NLoS component") {
  LosModelParams los = kLos;
  los.kappa = 0.0;
  const auto geo = link_geometry({0, 0, 175}, {80, 60, 0});
  std::mt19937_64 a(11), b(999);
  const auto e1 = sample_echo_channel(geo, 0.02, los, kArray, a);
  const auto e2 = sample_echo_channel(geo, 0.02, los, kArray, b);
  CHECK((e1.matrix - e2.matrix).cwiseAbs().maxCoeff() <
        1e-14 * e1.matrix.cwiseAbs().maxCoeff());
}

TEST_CASE("link_geometry rejects zero slant distance") {
  CHECK_THROWS_AS(link_geometry({0, 0, 0}, {0, 0, 0}), NumericalError);
}

TEST_CASE("channel dump and replay round trip") {
  const auto cfg = isac::testing::make_desk_scenario(2, 2, 1, 3);
  const auto traj = straight_line_trajectory(cfg);
  const auto ch = sample_channels(cfg, traj, 77);
  const std::string path = "channels_roundtrip.json";
  dump_channels(ch, path);
  const auto back = replay_channels(path, cfg);
  CHECK(back.comm[1][2][3] == ch.comm[1][2][3]);
  CHECK(back.echo[0][0][1].beta == ch.echo[0][0][1].beta);
  CHECK(back.echo_deriv[1][0][2] == ch.echo_deriv[1][0][2]);
}
