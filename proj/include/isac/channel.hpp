// SPDX-License-Identifier: Apache-2.0
//
// Probabilistic LoS channel model: LoS probability, ULA steering vectors and
// their angle derivative, sampled communication and echo channels.
#pragma once

#include <complex>
#include <fstream>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "isac/common.hpp"
#include "isac/scenario.hpp"

namespace isac {

using Cplx = std::complex<double>;

struct LinkGeometry {
  double horizontal_distance = 0.0;  // m
  double altitude = 0.0;             // H, m
  double slant_distance = 0.0;       // d = sqrt(horizontal^2 + H^2), m
  double elevation_deg = 0.0;        // phi = (180/pi) asin(H/d)

  double elevation_rad() const { return deg_to_rad(elevation_deg); }
};

// Positions are 3D; the slant distance combines the horizontal offset with
// the altitude gap, so d^2 = horizontal^2 + H^2 and phi = asin(H/d).
inline LinkGeometry link_geometry(const Eigen::Vector3d& uav,
                                  const Eigen::Vector3d& ground) {
  LinkGeometry g;
  g.horizontal_distance = std::hypot(uav.x() - ground.x(), uav.y() - ground.y());
  g.altitude = uav.z() - ground.z();
  g.slant_distance = std::hypot(g.horizontal_distance, g.altitude);
  if (g.slant_distance <= 0.0)
    throw NumericalError("link geometry degenerate: zero slant distance");
  g.elevation_deg = rad_to_deg(std::asin(g.altitude / g.slant_distance));
  return g;
}

// LoS probability 1 / (1 + C exp(-D (phi - C))), phi in degrees.
inline double los_probability(double phi_deg, const LosModelParams& p) {
  if (phi_deg < 0.0 || phi_deg > 90.0)
    throw ValidationError("elevation angle out of [0, 90] degrees");
  return 1.0 / (1.0 + p.c * std::exp(-p.d_per_degree * (phi_deg - p.c)));
}

// ULA steering vector, element m = exp(-j 2 pi m d sin(phi) / lambda).
inline Eigen::VectorXcd steering_vector(double phi_rad, const ArrayGeometry& g) {
  Eigen::VectorXcd a(g.antenna_count);
  const double step = 2.0 * kPi * g.element_spacing * std::sin(phi_rad) / g.wavelength;
  for (int m = 0; m < g.antenna_count; ++m)
    a(m) = std::exp(Cplx(0.0, -step * m));
  return a;
}

// Elementwise derivative of steering_vector w.r.t. phi (radians).
inline Eigen::VectorXcd steering_derivative(double phi_rad, const ArrayGeometry& g) {
  Eigen::VectorXcd da(g.antenna_count);
  const double k = 2.0 * kPi * g.element_spacing / g.wavelength;
  const double step = k * std::sin(phi_rad);
  for (int m = 0; m < g.antenna_count; ++m)
    da(m) = Cplx(0.0, -k * m * std::cos(phi_rad)) * std::exp(Cplx(0.0, -step * m));
  return da;
}

inline Eigen::VectorXcd circular_gaussian_vector(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXcd w(m);
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < m; ++i) {
    const double re = n01(rng);
    const double im = n01(rng);
    w(i) = Cplx(re * s, im * s);
  }
  return w;
}

inline Eigen::MatrixXcd circular_gaussian_matrix(int m, std::mt19937_64& rng) {
  Eigen::MatrixXcd w(m, m);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double s = 1.0 / std::sqrt(2.0);
  for (int c = 0; c < m; ++c)
    for (int r = 0; r < m; ++r) {
      const double re = n01(rng);
      const double im = n01(rng);
      w(r, c) = Cplx(re * s, im * s);
    }
  return w;
}

// h = sqrt(Pr_LoS a0 d^-2) s(phi) + sqrt(Pr_NLoS a0 d^-2) w.
inline Eigen::VectorXcd sample_comm_channel(const LinkGeometry& geo,
                                            const LosModelParams& los,
                                            const ArrayGeometry& arr,
                                            std::mt19937_64& rng) {
  const double pr_los = los_probability(geo.elevation_deg, los);
  const double gain = los.alpha0() / (geo.slant_distance * geo.slant_distance);
  const Eigen::VectorXcd s = steering_vector(geo.elevation_rad(), arr);
  const Eigen::VectorXcd w = circular_gaussian_vector(arr.antenna_count, rng);
  return std::sqrt(pr_los * gain) * s + std::sqrt((1.0 - pr_los) * gain) * w;
}

struct EchoChannel {
  Eigen::MatrixXcd matrix;  // round-trip response, M x M
  double beta = 0.0;        // sigma_k / (2 d)
};

// Echo of target k: beta [ sqrt(Pr_LoS) a a^H + sqrt(Pr_NLoS kappa) W ].
inline EchoChannel sample_echo_channel(const LinkGeometry& geo, double rcs,
                                       const LosModelParams& los,
                                       const ArrayGeometry& arr,
                                       std::mt19937_64& rng) {
  EchoChannel e;
  e.beta = rcs / (2.0 * geo.slant_distance);
  const double pr_los = los_probability(geo.elevation_deg, los);
  const Eigen::VectorXcd a = steering_vector(geo.elevation_rad(), arr);
  const Eigen::MatrixXcd w = circular_gaussian_matrix(arr.antenna_count, rng);
  e.matrix = e.beta * (std::sqrt(pr_los) * (a * a.adjoint()) +
                       std::sqrt((1.0 - pr_los) * los.kappa) * w);
  return e;
}

// Derivative of the deterministic LoS dyad sqrt(Pr_LoS) a a^H w.r.t. phi.
// The NLoS draw and the LoS probability are held constant within a slot.
inline Eigen::MatrixXcd echo_dyad_derivative(const LinkGeometry& geo,
                                             const LosModelParams& los,
                                             const ArrayGeometry& arr) {
  const double pr_los = los_probability(geo.elevation_deg, los);
  const Eigen::VectorXcd a = steering_vector(geo.elevation_rad(), arr);
  const Eigen::VectorXcd da = steering_derivative(geo.elevation_rad(), arr);
  return std::sqrt(pr_los) * (da * a.adjoint() + a * da.adjoint());
}

// ---------------------------------------------------------------------------
// Per-run channel realization: comm channels for every (UAV, user, slot),
// echo channels for every (UAV, own target, slot).

struct ChannelRealization {
  int uav_count = 0, user_count = 0, slot_count = 0;
  // comm[u][global v][n], slots 1..N used by the optimizers; index 0 unused.
  std::vector<std::vector<std::vector<Eigen::VectorXcd>>> comm;
  std::vector<std::vector<std::vector<double>>> comm_los_prob;
  // echo[u][local k][n] and the derivative matrix A-bar for the CRB.
  std::vector<std::vector<std::vector<EchoChannel>>> echo;
  std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> echo_deriv;

  const Eigen::VectorXcd& h(int u, int global_v, int n) const {
    return comm[u][global_v][n];
  }
  Eigen::MatrixXcd lifted_h(int u, int global_v, int n) const {
    const auto& v = comm[u][global_v][n];
    return v * v.adjoint();
  }
};

// Samples the whole realization along a trajectory. NLoS draws use
// independent substreams keyed by (slot, uav, node) so the realization for a
// slot does not depend on the UAV position, only the deterministic geometry
// does. That keeps replays and RL environment steps reproducible.
inline ChannelRealization sample_channels(const ScenarioConfig& cfg,
                                          const TrajectorySet& traj,
                                          std::uint64_t seed) {
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
                               std::vector<double>(n_slots + 1, 0.0));
    ch.echo[u].assign(cfg.targets_of(u), std::vector<EchoChannel>(n_slots + 1));
    ch.echo_deriv[u].assign(cfg.targets_of(u),
                            std::vector<Eigen::MatrixXcd>(n_slots + 1));
    for (int n = 1; n <= n_slots; ++n) {
      for (int v = 0; v < cfg.user_count(); ++v) {
        std::mt19937_64 rng(derive_seed(seed, n, u, v));
        const auto geo = link_geometry(traj.positions[u][n], cfg.user_positions[v]);
        ch.comm[u][v][n] = sample_comm_channel(geo, cfg.los, cfg.array, rng);
        ch.comm_los_prob[u][v][n] = los_probability(geo.elevation_deg, cfg.los);
      }
      for (int k = 0; k < cfg.targets_of(u); ++k) {
        const int gk = cfg.target_id(u, k);
        std::mt19937_64 rng(derive_seed(seed, n, u, 1000 + gk));
        const auto geo =
            link_geometry(traj.positions[u][n], cfg.target_position(gk, n));
        ch.echo[u][k][n] =
            sample_echo_channel(geo, cfg.rcs(gk), cfg.los, cfg.array, rng);
        ch.echo_deriv[u][k][n] = echo_dyad_derivative(geo, cfg.los, cfg.array);
      }
    }
  }
  return ch;
}

// ---------------------------------------------------------------------------
// Channel dump / replay (JSON keyed by (u, node, n), real/imag parts).

namespace detail {

inline nlohmann::json cvec_to_json(const Eigen::VectorXcd& v) {
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  return {{"re", re}, {"im", im}};
}

inline nlohmann::json cmat_to_json(const Eigen::MatrixXcd& m) {
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json rr = nlohmann::json::array(), ri = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) {
      rr.push_back(m(r, c).real());
      ri.push_back(m(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  return {{"re", re}, {"im", im}};
}

inline Eigen::VectorXcd cvec_from_json(const nlohmann::json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  Eigen::VectorXcd v(re.size());
  for (std::size_t i = 0; i < re.size(); ++i)
    v(i) = Cplx(re[i].get<double>(), im[i].get<double>());
  return v;
}

inline Eigen::MatrixXcd cmat_from_json(const nlohmann::json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  const int rows = static_cast<int>(re.size());
  const int cols = rows ? static_cast<int>(re[0].size()) : 0;
  Eigen::MatrixXcd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = Cplx(re[r][c].get<double>(), im[r][c].get<double>());
  return m;
}

}  // namespace detail

inline void dump_channels(const ChannelRealization& ch, const std::string& path) {
  nlohmann::json j;
  j["format"] = "isacsim-channels-v1";
  j["uav_count"] = ch.uav_count;
  j["user_count"] = ch.user_count;
  j["slot_count"] = ch.slot_count;
  auto comm = nlohmann::json::array();
  auto echo = nlohmann::json::array();
  for (int u = 0; u < ch.uav_count; ++u) {
    for (int v = 0; v < ch.user_count; ++v)
      for (int n = 1; n <= ch.slot_count; ++n)
        comm.push_back({{"u", u},
                        {"node", v},
                        {"n", n},
                        {"h", detail::cvec_to_json(ch.comm[u][v][n])},
                        {"los_prob", ch.comm_los_prob[u][v][n]}});
    for (std::size_t k = 0; k < ch.echo[u].size(); ++k)
      for (int n = 1; n <= ch.slot_count; ++n)
        echo.push_back({{"u", u},
                        {"node", static_cast<int>(k)},
                        {"n", n},
                        {"matrix", detail::cmat_to_json(ch.echo[u][k][n].matrix)},
                        {"beta", ch.echo[u][k][n].beta},
                        {"deriv", detail::cmat_to_json(ch.echo_deriv[u][k][n])}});
  }
  j["comm"] = std::move(comm);
  j["echo"] = std::move(echo);
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write channel dump: " + path);
  out << j.dump() << "\n";
}

inline ChannelRealization replay_channels(const std::string& path,
                                          const ScenarioConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open channel dump: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != std::string("isacsim-channels-v1"))
    throw SchemaError("unrecognized channel dump format");
  ChannelRealization ch;
  ch.uav_count = j.at("uav_count").get<int>();
  ch.user_count = j.at("user_count").get<int>();
  ch.slot_count = j.at("slot_count").get<int>();
  if (ch.uav_count != cfg.uav_count || ch.user_count != cfg.user_count() ||
      ch.slot_count != cfg.time_grid.slot_count)
    throw ValidationError("channel dump does not match the scenario shape");
  ch.comm.assign(ch.uav_count, std::vector<std::vector<Eigen::VectorXcd>>(
                                   ch.user_count,
                                   std::vector<Eigen::VectorXcd>(ch.slot_count + 1)));
  ch.comm_los_prob.assign(
      ch.uav_count, std::vector<std::vector<double>>(
                        ch.user_count, std::vector<double>(ch.slot_count + 1, 0.0)));
  ch.echo.assign(ch.uav_count, {});
  ch.echo_deriv.assign(ch.uav_count, {});
  for (int u = 0; u < ch.uav_count; ++u) {
    ch.echo[u].assign(cfg.targets_of(u),
                      std::vector<EchoChannel>(ch.slot_count + 1));
    ch.echo_deriv[u].assign(cfg.targets_of(u),
                            std::vector<Eigen::MatrixXcd>(ch.slot_count + 1));
  }
  for (const auto& e : j.at("comm")) {
    const int u = e.at("u").get<int>(), v = e.at("node").get<int>(),
              n = e.at("n").get<int>();
    ch.comm[u][v][n] = detail::cvec_from_json(e.at("h"));
    ch.comm_los_prob[u][v][n] = e.at("los_prob").get<double>();
  }
  for (const auto& e : j.at("echo")) {
    const int u = e.at("u").get<int>(), k = e.at("node").get<int>(),
              n = e.at("n").get<int>();
    ch.echo[u][k][n].matrix = detail::cmat_from_json(e.at("matrix"));
    ch.echo[u][k][n].beta = e.at("beta").get<double>();
    ch.echo_deriv[u][k][n] = detail::cmat_from_json(e.at("deriv"));
  }
  return ch;
}

}  // namespace isac
