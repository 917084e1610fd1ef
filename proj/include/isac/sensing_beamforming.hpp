// SPDX-License-Identifier: Apache-2.0
//
// Successive convex approximation for the sensing covariances I and the
// per-user SINR lower bounds iota. The bilinear coupling iota * Theta is
// replaced by the convex surrogate Theta^2/(2 Omega) + iota^2 Omega / 2,
// tight at Omega = Theta / iota, so each iterate stays feasible for the
// original constraint and the rate bound is monotone.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "isac/conic.hpp"
#include "isac/metrics.hpp"

namespace isac {

struct ScaState {
  // iota[u][local v][n], omega[u][local v][n]; slot 0 unused.
  std::vector<std::vector<std::vector<double>>> iota;
  std::vector<std::vector<std::vector<double>>> omega;
  std::vector<double> objective_trace;  // bits, appended after each solve
  int iterations = 0;
  double relaxed_objective = 0.0;
  double extracted_objective = 0.0;  // realized sum rate after extraction
  double min_extraction_quality = 1.0;
  double min_crb_margin = std::numeric_limits<double>::infinity();
  double max_residual = 0.0;
};

constexpr double kIotaFloor = 1e-8;

inline ScaState make_sca_state(const ScenarioConfig& cfg) {
  ScaState s;
  const int n_slots = cfg.time_grid.slot_count;
  s.iota.assign(cfg.uav_count, {});
  s.omega.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
    s.iota[u].assign(cfg.users_of(u),
                     std::vector<double>(n_slots + 1, kIotaFloor));
    s.omega[u].assign(cfg.users_of(u), std::vector<double>(n_slots + 1, 1.0));
  }
  return s;
}

// Minimal trace term required by the angle-error bound for target k of UAV u:
// Tr(Abar^H Abar I) >= sigma^2 / (2 Gamma beta^2).
inline double crb_required_trace(const ChannelRealization& ch,
                                 const ScenarioConfig& cfg, int u, int k, int n) {
  const double beta = ch.echo[u][k][n].beta;
  if (!(beta > 0.0))
    throw NumericalError("echo gain beta must be positive for the CRB bound");
  return cfg.noise_power() / (2.0 * cfg.gamma(u, k, n) * beta * beta);
}

// Expansion constants: Omega = Theta / iota, the choice that makes the
// surrogate tight at the current point.
inline void update_omega(ScaState& state, const BeamformerSet& b,
                         const ChannelRealization& ch, const ScenarioConfig& cfg) {
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const double iota = std::max(state.iota[u][v][n], kIotaFloor);
        state.iota[u][v][n] = iota;
        state.omega[u][v][n] = compute_theta(b, ch, cfg, u, v, n) / iota;
      }
}

inline double sca_objective(const ScaState& state, const ScenarioConfig& cfg) {
  const double tau = cfg.time_grid.slot_length();
  double f = 0.0;
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        f += tau * std::log2(1.0 + state.iota[u][v][n]);
  return f;
}

// Joint conic solve over all lifted I and iota at fixed (G, Omega).
inline conic::ConicSolution solve_I_iota(ScaState& state, BeamformerSet& b,
                                         const ChannelRealization& ch,
                                         const TrajectorySet& traj,
                                         const ScenarioConfig& cfg,
                                         int newton_cap = 4000) {
  const int n_slots = cfg.time_grid.slot_count;
  const int m = cfg.array.antenna_count;
  const double tau = cfg.time_grid.slot_length();
  const double s2 = cfg.noise_power();

  // Variable layout: PSD per (u, k, n); scalar iota per (u, v, n). Links
  // whose own communication beam carries no power cannot support a positive
  // SINR bound, so their iota is pinned to zero and left out of the problem.
  std::vector<std::vector<std::vector<int>>> ivar(cfg.uav_count);
  std::vector<std::vector<std::vector<int>>> svar(cfg.uav_count);
  int n_mats = 0, n_scalars = 0;
  for (int u = 0; u < cfg.uav_count; ++u) {
    ivar[u].assign(cfg.targets_of(u), std::vector<int>(n_slots + 1, -1));
    svar[u].assign(cfg.users_of(u), std::vector<int>(n_slots + 1, -1));
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= n_slots; ++n) ivar[u][k][n] = n_mats++;
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n) {
        const Eigen::VectorXcd& h = ch.h(u, cfg.user_id(u, v), n);
        const double own =
            (h.adjoint() * b.lifted_comm[u][v][n] * h).real()(0);
        if (own > 0.0) svar[u][v][n] = n_scalars++;
      }
  }

  // Fixed communication power per (u, n).
  std::vector<std::vector<double>> comm_power(
      cfg.uav_count, std::vector<double>(n_slots + 1, 0.0));
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int n = 1; n <= n_slots; ++n)
      for (int v = 0; v < cfg.users_of(u); ++v)
        comm_power[u][n] += b.lifted_comm[u][v][n].trace().real();

  conic::ConicProblem prob;
  prob.matrix_dim = m;
  prob.psd_count = n_mats;
  prob.scalar_count = n_scalars;

  // Fast infeasibility screen: the minimal-power rank-one choice per target
  // must fit the per-slot power and per-UAV energy budgets.
  for (int u = 0; u < cfg.uav_count; ++u) {
    double min_energy = 0.0;
    for (int n = 1; n <= n_slots; ++n) {
      double need = 0.0;
      int worst_k = 0;
      double worst_p = -1.0;
      for (int k = 0; k < cfg.targets_of(u); ++k) {
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        const Eigen::MatrixXcd d = abar.adjoint() * abar;
        const double lmax =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(d).eigenvalues().maxCoeff();
        if (!(lmax > 0.0))
          throw InfeasibleError("angle-error bound unattainable at (u=" +
                                std::to_string(u) + ", k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) +
                                "): zero derivative response");
        const double p = crb_required_trace(ch, cfg, u, k, n) / lmax;
        need += p;
        if (p > worst_p) { worst_p = p; worst_k = k; }
      }
      min_energy += tau * need;
      if (need > cfg.power_budget[u] - comm_power[u][n] + 1e-12)
        throw InfeasibleError(
            "angle-error bound infeasible under the power budget at (u=" +
            std::to_string(u) + ", k=" + std::to_string(worst_k) +
            ", n=" + std::to_string(n) + ")");
    }
    // energy screen uses the same minimal choice with flight power fixed
    double flight = 0.0;
    for (int n = 1; n <= n_slots; ++n)
      flight += compute_flight_energy(traj.state_at(u, n, tau), cfg.flight, tau);
    double comm_energy = 0.0;
    for (int n = 1; n <= n_slots; ++n) comm_energy += tau * comm_power[u][n];
    if (min_energy > cfg.energy_budget[u] - flight - comm_energy + 1e-12)
      throw InfeasibleError(
          "angle-error bound infeasible under the energy budget of UAV " +
          std::to_string(u));
  }

  if (n_mats == 0 && n_scalars == 0) {
    conic::ConicSolution sol;
    sol.status = conic::SolveStatus::Optimal;
    sol.objective = 0.0;
    return sol;
  }

  // Objective: sum tau ln(1 + iota); reported values divide by ln 2.
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n)
        if (svar[u][v][n] >= 0) prob.log_terms.push_back({tau, svar[u][v][n]});

  // (9b) per (u, k, n) and iota >= 0.
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= n_slots; ++n) {
        // normalized by the required trace so the slack is O(1)
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        const double need = crb_required_trace(ch, cfg, u, k, n);
        conic::LinearConstraint crb;
        crb.expr.add_matrix(ivar[u][k][n],
                            ((abar.adjoint() * abar) / need).eval());
        crb.sense = conic::Sense::GreaterEq;
        crb.bound = 1.0;
        prob.linear_constraints.push_back(std::move(crb));
      }
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n) {
        if (svar[u][v][n] < 0) continue;
        conic::LinearConstraint nonneg;
        nonneg.expr.add_scalar(svar[u][v][n], 1.0);
        nonneg.sense = conic::Sense::GreaterEq;
        nonneg.bound = 0.0;
        prob.linear_constraints.push_back(std::move(nonneg));
      }
  }

  // Power per (u, n) and energy per u with comm covariances fixed.
  for (int u = 0; u < cfg.uav_count; ++u) {
    if (cfg.targets_of(u) == 0) continue;
    conic::LinearConstraint energy;
    double flight = 0.0;
    for (int n = 1; n <= n_slots; ++n) {
      flight += compute_flight_energy(traj.state_at(u, n, tau), cfg.flight, tau);
      conic::LinearConstraint power;
      for (int k = 0; k < cfg.targets_of(u); ++k) {
        power.expr.add_matrix(ivar[u][k][n], Eigen::MatrixXcd::Identity(m, m));
        energy.expr.add_matrix(ivar[u][k][n],
                               tau * Eigen::MatrixXcd::Identity(m, m));
      }
      power.bound = cfg.power_budget[u] - comm_power[u][n];
      energy.bound -= tau * comm_power[u][n];
      prob.linear_constraints.push_back(std::move(power));
    }
    energy.bound += cfg.energy_budget[u] - flight;
    prob.linear_constraints.push_back(std::move(energy));
  }

  // Surrogate per (u, v, n): Theta^2/(2 Omega) + iota^2 Omega/2 <= Tr(HG),
  // everything normalized by the noise power.
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n) {
        if (svar[u][v][n] < 0) continue;
        const int gv = cfg.user_id(u, v);
        const double omega_n = state.omega[u][v][n] / s2;
        if (!(omega_n > 0.0))
          throw NumericalError("surrogate expansion constant must be positive");
        conic::QuadConstraint qc;
        qc.alpha = 1.0 / (2.0 * omega_n);
        qc.beta = omega_n / 2.0;
        qc.scalar_index = svar[u][v][n];
        double fixed = 1.0;  // normalized noise
        for (int up = 0; up < cfg.uav_count; ++up) {
          const Eigen::MatrixXcd hn = ch.lifted_h(up, gv, n) / s2;
          for (int vp = 0; vp < cfg.users_of(up); ++vp) {
            if (up == u && vp == v) continue;
            fixed += (hn * b.lifted_comm[up][vp][n]).trace().real();
          }
          for (int k = 0; k < cfg.targets_of(up); ++k)
            qc.e.add_matrix(ivar[up][k][n], hn);
        }
        qc.e.constant = fixed;
        const Eigen::VectorXcd& h = ch.h(u, gv, n);
        qc.rhs.constant =
            (h.adjoint() * b.lifted_comm[u][v][n] * h).real()(0) / s2;
        prob.quad_constraints.push_back(std::move(qc));
      }

  // Warm start from the current iterate, nudged inward.
  conic::SolverOptions opts;
  opts.max_iterations = newton_cap;
  conic::InitialPoint ip;
  ip.matrices.resize(n_mats);
  ip.scalars = Eigen::VectorXd::Zero(n_scalars);
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= n_slots; ++n) {
        const double eps =
            1e-3 * std::max(1e-12, b.lifted_sense[u][k][n].trace().real()) / m;
        ip.matrices[ivar[u][k][n]] =
            1.02 * b.lifted_sense[u][k][n] + eps * Eigen::MatrixXcd::Identity(m, m);
      }
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n)
        if (svar[u][v][n] >= 0)
          ip.scalars(svar[u][v][n]) =
              std::max(kIotaFloor, 0.999 * state.iota[u][v][n]);
  }
  opts.initial_point = std::move(ip);

  auto sol = conic::solve(prob, opts);
  if (sol.status == conic::SolveStatus::Infeasible)
    throw InfeasibleError("sensing covariance subproblem infeasible: " +
                          sol.message);
  if (sol.status != conic::SolveStatus::Optimal)
    throw NumericalError("sensing covariance solve failed: " + sol.message);
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= n_slots; ++n)
        b.lifted_sense[u][k][n] = sol.matrices[ivar[u][k][n]];
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n)
        state.iota[u][v][n] = svar[u][v][n] >= 0
                                  ? std::max(0.0, sol.scalars(svar[u][v][n]))
                                  : 0.0;
  }
  return sol;
}

// Minimal-power rank-one start: each sensing covariance points along the
// principal direction of Abar^H Abar with 5% headroom over the bound.
inline void init_sense_minimal(BeamformerSet& b, const ChannelRealization& ch,
                               const ScenarioConfig& cfg) {
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        const Eigen::MatrixXcd d = abar.adjoint() * abar;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d);
        const int last = cfg.array.antenna_count - 1;
        const double lmax = es.eigenvalues()(last);
        if (!(lmax > 0.0))
          throw InfeasibleError("angle-error bound unattainable at (u=" +
                                std::to_string(u) + ", k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
        const double p = 1.05 * crb_required_trace(ch, cfg, u, k, n) / lmax;
        b.sense[u][k][n] = std::sqrt(p) * es.eigenvectors().col(last);
        b.lifted_sense[u][k][n] = b.sense[u][k][n] * b.sense[u][k][n].adjoint();
      }
}

struct Alg2Options {
  int max_iters = 100;
  double epsilon = 1e-4;
  int newton_cap = 4000;
  bool init_if_zero = true;
};

// Alternates expansion-point refresh and conic solves, then extracts
// rank-one sensing vectors and rescales them so the angle-error bound still
// holds on the extracted solution.
inline ScaState run_alg2(BeamformerSet& b, const ChannelRealization& ch,
                         const TrajectorySet& traj, const ScenarioConfig& cfg,
                         const Alg2Options& opt = {}) {
  ScaState state = make_sca_state(cfg);
  if (opt.init_if_zero) {
    double total = 0.0;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int k = 0; k < cfg.targets_of(u); ++k)
        for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
          total += b.lifted_sense[u][k][n].cwiseAbs().sum();
    if (total == 0.0) init_sense_minimal(b, ch, cfg);
  }

  // iota starts just under the realized SINR so the surrogate has slack.
  const auto rates0 = compute_rates(b, ch, cfg);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        state.iota[u][v][n] =
            std::max(kIotaFloor, 0.99 * rates0.entries[u][v][n].sinr);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    state.iterations = it + 1;
    update_omega(state, b, ch, cfg);
    const auto sol = solve_I_iota(state, b, ch, traj, cfg, opt.newton_cap);
    state.max_residual = std::max(state.max_residual, sol.max_residual);
    const double f = sca_objective(state, cfg);
    state.objective_trace.push_back(f);
    if (std::abs(f - prev) < opt.epsilon * std::max(1.0, std::abs(prev))) {
      prev = f;
      break;
    }
    prev = f;
  }
  state.relaxed_objective = prev;

  for (int u = 0; u < cfg.uav_count; ++u)
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const auto r = rank_one_extract(b.lifted_sense[u][k][n], 1e-6);
        Eigen::VectorXcd v = r.vector;
        if (b.lifted_sense[u][k][n].trace().real() > 1e-12)
          state.min_extraction_quality =
              std::min(state.min_extraction_quality, r.quality);
        // rescale up if the principal component alone misses the bound
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        const double need = crb_required_trace(ch, cfg, u, k, n);
        const double got = (v.adjoint() * (abar.adjoint() * abar) * v).real()(0);
        if (got < need) {
          if (got > 1e-300 * need) {
            v *= std::sqrt(need * (1.0 + 1e-9) / got);
          } else {
            // degenerate extraction: rebuild the minimal-power vector
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
                (abar.adjoint() * abar).eval());
            const int last = cfg.array.antenna_count - 1;
            v = std::sqrt(need * (1.0 + 1e-9) / es.eigenvalues()(last)) *
                es.eigenvectors().col(last);
          }
        }
        b.sense[u][k][n] = v;
        b.lifted_sense[u][k][n] = v * v.adjoint();
      }

  const auto crb = compute_crb(b, ch, cfg);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        state.min_crb_margin =
            std::min(state.min_crb_margin,
                     cfg.gamma(u, k, n) - crb.entries[u][k][n].crb);
  state.extracted_objective = compute_rates(b, ch, cfg).sum_rate_bits;
  return state;
}

}  // namespace isac
