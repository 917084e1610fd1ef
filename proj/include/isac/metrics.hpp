// SPDX-License-Identifier: Apache-2.0
//
// Evaluation of rates (lifted trace form), CRB, energies and rank-one
// extraction for a beamformer set on a channel realization.
#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "isac/channel.hpp"
#include "isac/common.hpp"
#include "isac/scenario.hpp"

namespace isac {

inline double real_trace(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a * b).trace().real();
}

inline bool is_hermitian(const Eigen::MatrixXcd& x, double tol = 1e-9) {
  return (x - x.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, x.cwiseAbs().maxCoeff());
}

// Communication vectors g / sensing vectors i plus their lifted PSD
// counterparts G, I. The lifted matrices are the optimizer's source of
// truth; vectors are filled by rank-one extraction.
struct BeamformerSet {
  int uav_count = 0, slot_count = 0;
  // comm[u][local v][n], sense[u][local k][n]; slot index 0 unused.
  std::vector<std::vector<std::vector<Eigen::VectorXcd>>> comm;
  std::vector<std::vector<std::vector<Eigen::VectorXcd>>> sense;
  std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> lifted_comm;
  std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> lifted_sense;

  static BeamformerSet zeros(const ScenarioConfig& cfg) {
    BeamformerSet b;
    const int m = cfg.array.antenna_count;
    const int n_slots = cfg.time_grid.slot_count;
    b.uav_count = cfg.uav_count;
    b.slot_count = n_slots;
    b.comm.assign(cfg.uav_count, {});
    b.sense.assign(cfg.uav_count, {});
    b.lifted_comm.assign(cfg.uav_count, {});
    b.lifted_sense.assign(cfg.uav_count, {});
    for (int u = 0; u < cfg.uav_count; ++u) {
      b.comm[u].assign(cfg.users_of(u),
                       std::vector<Eigen::VectorXcd>(n_slots + 1,
                                                     Eigen::VectorXcd::Zero(m)));
      b.sense[u].assign(cfg.targets_of(u),
                        std::vector<Eigen::VectorXcd>(n_slots + 1,
                                                      Eigen::VectorXcd::Zero(m)));
      b.lifted_comm[u].assign(
          cfg.users_of(u), std::vector<Eigen::MatrixXcd>(
                               n_slots + 1, Eigen::MatrixXcd::Zero(m, m)));
      b.lifted_sense[u].assign(
          cfg.targets_of(u), std::vector<Eigen::MatrixXcd>(
                                 n_slots + 1, Eigen::MatrixXcd::Zero(m, m)));
    }
    return b;
  }

  // Rebuilds every lifted matrix as the dyad of its vector.
  void lift_from_vectors() {
    for (int u = 0; u < uav_count; ++u) {
      for (std::size_t v = 0; v < comm[u].size(); ++v)
        for (int n = 1; n <= slot_count; ++n)
          lifted_comm[u][v][n] = comm[u][v][n] * comm[u][v][n].adjoint();
      for (std::size_t k = 0; k < sense[u].size(); ++k)
        for (int n = 1; n <= slot_count; ++n)
          lifted_sense[u][k][n] = sense[u][k][n] * sense[u][k][n].adjoint();
    }
  }
};

struct RateEntry {
  double signal = 0.0;
  double intra_interference = 0.0;
  double inter_interference = 0.0;
  double sinr = 0.0;
  double rate_bits = 0.0;
};

struct RateReport {
  // entries[u][local v][n]; slot 0 unused.
  std::vector<std::vector<std::vector<RateEntry>>> entries;
  double sum_rate_bits = 0.0;

  double slot_sum_rate(int n) const {
    double s = 0.0;
    for (const auto& per_uav : entries)
      for (const auto& per_user : per_uav) s += per_user[n].rate_bits;
    return s;
  }
};

// Denominator Theta of the lifted SINR for user v of UAV u: incoherent sum
// of interference traces plus noise.
inline double compute_theta(const BeamformerSet& b, const ChannelRealization& ch,
                            const ScenarioConfig& cfg, int u, int v, int n) {
  const int gv = cfg.user_id(u, v);
  double theta = cfg.noise_power();
  for (int up = 0; up < cfg.uav_count; ++up) {
    const Eigen::VectorXcd& h = ch.h(up, gv, n);
    for (int vp = 0; vp < cfg.users_of(up); ++vp) {
      if (up == u && vp == v) continue;
      theta += (h.adjoint() * b.lifted_comm[up][vp][n] * h).real()(0);
    }
    for (int k = 0; k < cfg.targets_of(up); ++k)
      theta += (h.adjoint() * b.lifted_sense[up][k][n] * h).real()(0);
  }
  return theta;
}

inline RateReport compute_rates(const BeamformerSet& b, const ChannelRealization& ch,
                                const ScenarioConfig& cfg) {
  const int n_slots = cfg.time_grid.slot_count;
  const double tau = cfg.time_grid.slot_length();
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (const auto& per_user : b.lifted_comm[u])
      for (int n = 1; n <= n_slots; ++n)
        if (!is_hermitian(per_user[n]))
          throw ValidationError("lifted comm beamformer is not Hermitian");
    for (const auto& per_target : b.lifted_sense[u])
      for (int n = 1; n <= n_slots; ++n)
        if (!is_hermitian(per_target[n]))
          throw ValidationError("lifted sensing beamformer is not Hermitian");
  }

  RateReport r;
  r.entries.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
    r.entries[u].assign(cfg.users_of(u), std::vector<RateEntry>(n_slots + 1));
    for (int v = 0; v < cfg.users_of(u); ++v) {
      const int gv = cfg.user_id(u, v);
      for (int n = 1; n <= n_slots; ++n) {
        RateEntry& e = r.entries[u][v][n];
        const Eigen::VectorXcd& h = ch.h(u, gv, n);
        e.signal = (h.adjoint() * b.lifted_comm[u][v][n] * h).real()(0);
        double intra = 0.0;
        for (int vp = 0; vp < cfg.users_of(u); ++vp)
          if (vp != v) intra += (h.adjoint() * b.lifted_comm[u][vp][n] * h).real()(0);
        for (int k = 0; k < cfg.targets_of(u); ++k)
          intra += (h.adjoint() * b.lifted_sense[u][k][n] * h).real()(0);
        e.intra_interference = intra;
        double inter = 0.0;
        for (int up = 0; up < cfg.uav_count; ++up) {
          if (up == u) continue;
          const Eigen::VectorXcd& hp = ch.h(up, gv, n);
          for (int vp = 0; vp < cfg.users_of(up); ++vp)
            inter += (hp.adjoint() * b.lifted_comm[up][vp][n] * hp).real()(0);
          for (int k = 0; k < cfg.targets_of(up); ++k)
            inter += (hp.adjoint() * b.lifted_sense[up][k][n] * hp).real()(0);
        }
        e.inter_interference = inter;
        e.sinr = e.signal / (intra + inter + cfg.noise_power());
        e.rate_bits = tau * std::log2(1.0 + e.sinr);
        r.sum_rate_bits += e.rate_bits;
      }
    }
  }
  return r;
}

struct CrbEntry {
  double crb = std::numeric_limits<double>::infinity();  // rad^2
  double trace_term = 0.0;  // Tr(Abar^H Abar I)
};

struct CrbReport {
  // entries[u][local k][n]; slot 0 unused.
  std::vector<std::vector<std::vector<CrbEntry>>> entries;

  double max_crb() const {
    double m = 0.0;
    for (const auto& per_uav : entries)
      for (const auto& per_target : per_uav)
        for (std::size_t n = 1; n < per_target.size(); ++n)
          m = std::max(m, per_target[n].crb);
    return m;
  }
};

// CRB(phi) = sigma^2 / (2 |beta|^2 Tr(Abar^H Abar I)). Zero sensing power
// yields an explicit infinity, not an exception.
inline CrbReport compute_crb(const BeamformerSet& b, const ChannelRealization& ch,
                             const ScenarioConfig& cfg) {
  const int n_slots = cfg.time_grid.slot_count;
  CrbReport r;
  r.entries.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
    r.entries[u].assign(cfg.targets_of(u), std::vector<CrbEntry>(n_slots + 1));
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= n_slots; ++n) {
        CrbEntry& e = r.entries[u][k][n];
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        double t = real_trace(abar.adjoint() * abar, b.lifted_sense[u][k][n]);
        if (t < -1e-9)
          throw NumericalError("CRB trace term significantly negative");
        t = std::max(t, 0.0);
        e.trace_term = t;
        const double beta = ch.echo[u][k][n].beta;
        if (t > 0.0) e.crb = cfg.noise_power() / (2.0 * beta * beta * t);
      }
  }
  return r;
}

// Flying power, Eq.-(7) shape: induced + parasite + blade profile (nested
// square root) + climb term; multiplied by tau for energy.
inline double compute_flight_energy(const UavState& s, const FlightPowerParams& p,
                                    double tau) {
  const double a = s.horizontal_speed;
  const double a2 = a * a;
  const double induced = p.c0 * (1.0 + 3.0 * a2 / (p.tip_speed * p.tip_speed));
  const double parasite = 0.5 * p.psi0 * p.rotor_solidity * p.air_density *
                          p.rotor_disc_area * a2 * a;
  const double h2 = p.hover_speed * p.hover_speed;
  const double blade =
      p.c1 * std::sqrt(std::sqrt(1.0 + a2 * a2 / (4.0 * h2 * h2)) - a2 / (2.0 * h2));
  const double climb = p.c2 * s.vertical_speed;
  return tau * (induced + parasite + blade + climb);
}

struct EnergyLedger {
  // per (u, n): cs[u][n], fl[u][n]; slot 0 unused.
  std::vector<std::vector<double>> cs;
  std::vector<std::vector<double>> fl;
  std::vector<double> total;   // per u
  std::vector<double> margin;  // E_th - total, per u
};

inline std::vector<std::vector<double>> compute_cs_energy(const BeamformerSet& b,
                                                          double tau) {
  std::vector<std::vector<double>> e(b.uav_count,
                                     std::vector<double>(b.slot_count + 1, 0.0));
  for (int u = 0; u < b.uav_count; ++u)
    for (int n = 1; n <= b.slot_count; ++n) {
      double p = 0.0;
      for (const auto& per_user : b.lifted_comm[u])
        p += per_user[n].trace().real();
      for (const auto& per_target : b.lifted_sense[u])
        p += per_target[n].trace().real();
      e[u][n] = tau * p;
    }
  return e;
}

inline EnergyLedger compute_energy_ledger(const BeamformerSet& b,
                                          const TrajectorySet& traj,
                                          const ScenarioConfig& cfg) {
  const double tau = cfg.time_grid.slot_length();
  EnergyLedger led;
  led.cs = compute_cs_energy(b, tau);
  led.fl.assign(cfg.uav_count, std::vector<double>(b.slot_count + 1, 0.0));
  led.total.assign(cfg.uav_count, 0.0);
  led.margin.assign(cfg.uav_count, 0.0);
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int n = 1; n <= b.slot_count; ++n) {
      led.fl[u][n] = compute_flight_energy(traj.state_at(u, n, tau), cfg.flight, tau);
      led.total[u] += led.cs[u][n] + led.fl[u][n];
    }
    led.margin[u] = cfg.energy_budget[u] - led.total[u];
  }
  return led;
}

struct RankOneResult {
  Eigen::VectorXcd vector;
  double quality = 0.0;  // lambda_max / Tr(X), in [0, 1]
};

// Principal-component extraction of a lifted beamformer. The global phase is
// fixed by making the first nonzero component real-positive.
inline RankOneResult rank_one_extract(const Eigen::MatrixXcd& x, double tol = 1e-8) {
  if (!is_hermitian(x, tol))
    throw NumericalError("rank_one_extract: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol * scale)
    throw NumericalError("rank_one_extract: matrix is not PSD within tolerance");
  const int last = static_cast<int>(x.rows()) - 1;
  const double lmax = std::max(0.0, es.eigenvalues()(last));
  RankOneResult r;
  r.vector = std::sqrt(lmax) * es.eigenvectors().col(last);
  for (int i = 0; i < r.vector.size(); ++i) {
    if (std::abs(r.vector(i)) > 1e-14) {
      r.vector *= std::conj(r.vector(i)) / std::abs(r.vector(i));
      break;
    }
  }
  const double tr = x.trace().real();
  r.quality = tr > 0.0 ? std::clamp(lmax / tr, 0.0, 1.0) : 0.0;
  return r;
}

}  // namespace isac
