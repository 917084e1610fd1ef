// SPDX-License-Identifier: Apache-2.0
//
// Fractional-programming design of the communication covariances G:
// alternating closed-form updates of the auxiliary variables (chi for the
// log decoupling, psi for the ratio decoupling) with a joint conic solve
// over all lifted G matrices. The internal objective uses natural logs,
// where the chi update is the exact coordinate maximizer; reported values
// are in bits.
#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "isac/conic.hpp"
#include "isac/metrics.hpp"

namespace isac {

struct FpState {
  // chi[u][local v][n], psi[u][local v][n]; slot 0 unused.
  std::vector<std::vector<std::vector<double>>> chi;
  std::vector<std::vector<std::vector<double>>> psi;
  std::vector<double> objective_trace;  // bits, appended after every step
  int iterations = 0;
  double relaxed_objective = 0.0;    // bits, before rank-one extraction
  double extracted_objective = 0.0;  // bits, after extraction + refresh
  double min_extraction_quality = 1.0;
  double max_residual = 0.0;  // worst conic constraint violation seen
};

inline FpState make_fp_state(const ScenarioConfig& cfg) {
  FpState s;
  const int n_slots = cfg.time_grid.slot_count;
  s.chi.assign(cfg.uav_count, {});
  s.psi.assign(cfg.uav_count, {});
  for (int u = 0; u < cfg.uav_count; ++u) {
    s.chi[u].assign(cfg.users_of(u), std::vector<double>(n_slots + 1, 0.0));
    s.psi[u].assign(cfg.users_of(u), std::vector<double>(n_slots + 1, 0.0));
  }
  return s;
}

namespace detail {

inline double link_signal(const BeamformerSet& b, const ChannelRealization& ch,
                          const ScenarioConfig& cfg, int u, int v, int n) {
  const Eigen::VectorXcd& h = ch.h(u, cfg.user_id(u, v), n);
  return (h.adjoint() * b.lifted_comm[u][v][n] * h).real()(0);
}

}  // namespace detail

// chi* = Tr(HG) / Theta, the exact per-link SINR at the current beams.
inline void update_chi(FpState& state, const BeamformerSet& b,
                       const ChannelRealization& ch, const ScenarioConfig& cfg) {
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const double theta = compute_theta(b, ch, cfg, u, v, n);
        if (!(theta > 0.0))
          throw NumericalError("degenerate SINR denominator (Theta <= 0)");
        state.chi[u][v][n] =
            std::max(0.0, detail::link_signal(b, ch, cfg, u, v, n) / theta);
      }
}

// psi* = sqrt(O) / P with O = (1 + chi) Tr(HG), P = Tr(HG) + Theta.
inline void update_psi(FpState& state, const BeamformerSet& b,
                       const ChannelRealization& ch, const ScenarioConfig& cfg) {
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const double s = detail::link_signal(b, ch, cfg, u, v, n);
        const double p = s + compute_theta(b, ch, cfg, u, v, n);
        if (!(p > 0.0))
          throw NumericalError("degenerate quadratic-transform denominator");
        const double o = (1.0 + state.chi[u][v][n]) * s;
        state.psi[u][v][n] = std::sqrt(std::max(0.0, o)) / p;
      }
}

// Full decoupled objective at the current (chi, psi, G), in bits:
// sum tau [ ln(1+chi) - chi + 2 psi sqrt(O) - psi^2 P ] / ln 2.
inline double fp_objective(const FpState& state, const BeamformerSet& b,
                           const ChannelRealization& ch, const ScenarioConfig& cfg) {
  const double tau = cfg.time_grid.slot_length();
  double f = 0.0;
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const double chi = state.chi[u][v][n];
        const double psi = state.psi[u][v][n];
        const double s = detail::link_signal(b, ch, cfg, u, v, n);
        const double p = s + compute_theta(b, ch, cfg, u, v, n);
        const double o = (1.0 + chi) * s;
        f += tau * (std::log1p(chi) - chi + 2.0 * psi * std::sqrt(std::max(0.0, o)) -
                    psi * psi * p);
      }
  return f / std::numbers::ln2;
}

// Dual-transform objective at (chi, G), in bits: the ratio is kept explicit,
// so this is the quantity the chi update maximizes exactly. The quadratic
// form equals it once psi is refreshed and lower-bounds it otherwise.
inline double fp_objective_dual(const FpState& state, const BeamformerSet& b,
                                const ChannelRealization& ch,
                                const ScenarioConfig& cfg) {
  const double tau = cfg.time_grid.slot_length();
  double f = 0.0;
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const double chi = state.chi[u][v][n];
        const double s = detail::link_signal(b, ch, cfg, u, v, n);
        const double p = s + compute_theta(b, ch, cfg, u, v, n);
        f += tau * (std::log1p(chi) - chi + (1.0 + chi) * s / p);
      }
  return f / std::numbers::ln2;
}

// Joint conic solve over all lifted G at fixed (chi, psi, I, trajectory).
// Power (per UAV and slot) and energy (per UAV) constraints hold the sensing
// covariances and flight energy fixed. Returns the conic solution so callers
// can inspect residuals; beams.lifted_comm is overwritten on success.
inline conic::ConicSolution solve_G(const FpState& state, BeamformerSet& b,
                                    const ChannelRealization& ch,
                                    const TrajectorySet& traj,
                                    const ScenarioConfig& cfg,
                                    int newton_cap = 4000) {
  const int n_slots = cfg.time_grid.slot_count;
  const int m = cfg.array.antenna_count;
  const double tau = cfg.time_grid.slot_length();
  const double s2 = cfg.noise_power();

  // Fixed sensing power per (u, n) and its interference into each user.
  std::vector<std::vector<double>> sense_power(
      cfg.uav_count, std::vector<double>(n_slots + 1, 0.0));
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int n = 1; n <= n_slots; ++n)
      for (int k = 0; k < cfg.targets_of(u); ++k)
        sense_power[u][n] += b.lifted_sense[u][k][n].trace().real();

  // Variable layout: one PSD matrix per (u, v, n). Slots with a zero power
  // budget have no interior; their covariances are pinned to zero instead.
  std::vector<std::vector<std::vector<int>>> var(cfg.uav_count);
  int n_vars = 0;
  for (int u = 0; u < cfg.uav_count; ++u) {
    var[u].assign(cfg.users_of(u), std::vector<int>(n_slots + 1, -1));
    for (int n = 1; n <= n_slots; ++n) {
      if (cfg.power_budget[u] - sense_power[u][n] <= 0.0) continue;
      for (int v = 0; v < cfg.users_of(u); ++v) var[u][v][n] = n_vars++;
    }
  }

  conic::ConicProblem prob;
  prob.matrix_dim = m;
  prob.psd_count = n_vars;

  double obj_constant = 0.0;  // nats
  std::map<int, Eigen::MatrixXcd> lin_coeff;  // accumulated linear objective
  auto add_lin = [&](int v_idx, const Eigen::MatrixXcd& c) {
    auto [it, fresh] = lin_coeff.try_emplace(v_idx, c);
    if (!fresh) it->second += c;
  };

  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n) {
        const int gv = cfg.user_id(u, v);
        const double chi = state.chi[u][v][n];
        const double psi_n = state.psi[u][v][n] * std::sqrt(s2);
        obj_constant += tau * (std::log1p(chi) - chi);

        // sqrt(O) epigraph: arg = (1 + chi) Tr(Hn G_uvn), weight 2 tau psi_n.
        if (var[u][v][n] >= 0 && psi_n > 0.0) {
          conic::SqrtTerm st;
          st.weight = 2.0 * tau * psi_n;
          st.arg.add_matrix(var[u][v][n],
                            ((1.0 + chi) / s2) * ch.lifted_h(u, gv, n));
          prob.sqrt_terms.push_back(std::move(st));
        }

        // -tau psi_n^2 P: P spans every covariance seen by user gv at slot n.
        const double c = -tau * psi_n * psi_n;
        double fixed = 1.0;  // normalized noise
        for (int up = 0; up < cfg.uav_count; ++up) {
          const Eigen::MatrixXcd hn = ch.lifted_h(up, gv, n) / s2;
          for (int vp = 0; vp < cfg.users_of(up); ++vp)
            if (var[up][vp][n] >= 0) add_lin(var[up][vp][n], c * hn);
          for (int k = 0; k < cfg.targets_of(up); ++k)
            fixed += (hn * b.lifted_sense[up][k][n]).trace().real();
        }
        obj_constant += c * fixed;
      }
  prob.linear_objective.constant = obj_constant;
  for (auto& [v_idx, coeff] : lin_coeff)
    prob.linear_objective.add_matrix(v_idx, std::move(coeff));

  // Per-(u, n) power and per-u energy budgets with sensing/flight fixed.
  for (int u = 0; u < cfg.uav_count; ++u) {
    conic::LinearConstraint energy;
    double flight = 0.0;
    for (int n = 1; n <= n_slots; ++n) {
      flight += compute_flight_energy(traj.state_at(u, n, tau), cfg.flight, tau);
      const double room = cfg.power_budget[u] - sense_power[u][n];
      if (room < 0.0)
        throw InfeasibleError("sensing power alone exceeds the budget of UAV " +
                              std::to_string(u) + " at slot " + std::to_string(n));
      energy.bound -= tau * sense_power[u][n];
      if (cfg.users_of(u) == 0 || var[u][0][n] < 0) continue;  // pinned slot
      conic::LinearConstraint power;
      for (int v = 0; v < cfg.users_of(u); ++v) {
        power.expr.add_matrix(var[u][v][n], Eigen::MatrixXcd::Identity(m, m));
        energy.expr.add_matrix(var[u][v][n], tau * Eigen::MatrixXcd::Identity(m, m));
      }
      power.bound = room;
      prob.linear_constraints.push_back(std::move(power));
    }
    energy.bound += cfg.energy_budget[u] - flight;
    if (energy.bound < 0.0)
      throw InfeasibleError("flight plus sensing energy exceeds the budget of UAV " +
                            std::to_string(u));
    if (!energy.expr.matrix_terms.empty())
      prob.linear_constraints.push_back(std::move(energy));
  }

  // Warm start: shrink the current iterate toward a small multiple of the
  // identity, which keeps every budget strictly slack and the matrices
  // strictly positive definite.
  if (n_vars == 0) {  // every slot pinned: the zero solution is the optimum
    conic::ConicSolution trivial;
    trivial.status = conic::SolveStatus::Optimal;
    trivial.objective = obj_constant;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int v = 0; v < cfg.users_of(u); ++v)
        for (int n = 1; n <= n_slots; ++n)
          b.lifted_comm[u][v][n] = Eigen::MatrixXcd::Zero(m, m);
    return trivial;
  }

  conic::SolverOptions opts;
  opts.max_iterations = newton_cap;
  conic::InitialPoint ip;
  ip.matrices.resize(n_vars);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n) {
        if (var[u][v][n] < 0) continue;
        const double eps = 0.01 * (cfg.power_budget[u] - sense_power[u][n]) /
                           (cfg.users_of(u) * m);
        ip.matrices[var[u][v][n]] =
            0.9 * b.lifted_comm[u][v][n] + eps * Eigen::MatrixXcd::Identity(m, m);
      }
  opts.initial_point = std::move(ip);

  auto sol = conic::solve(prob, opts);
  if (sol.status == conic::SolveStatus::Infeasible)
    throw InfeasibleError("communication covariance subproblem infeasible: " +
                          sol.message);
  if (sol.status != conic::SolveStatus::Optimal)
    throw NumericalError("communication covariance solve failed: " + sol.message);
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= n_slots; ++n)
        b.lifted_comm[u][v][n] = var[u][v][n] >= 0
                                     ? sol.matrices[var[u][v][n]]
                                     : Eigen::MatrixXcd::Zero(m, m);
  return sol;
}

// Maximum-ratio starting point: each link points along its own channel with
// an equal share of the per-slot power room left by the sensing covariances.
// Starting near the power bound matters: the quadratic transform approaches
// a power-limited optimum in O(sigma^2) increments, so a half-power start
// needs O(SINR) iterations to climb.
inline void init_comm_mrt(BeamformerSet& b, const ChannelRealization& ch,
                          const ScenarioConfig& cfg) {
  for (int u = 0; u < cfg.uav_count; ++u) {
    for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
      double room = cfg.power_budget[u];
      for (int k = 0; k < cfg.targets_of(u); ++k)
        room -= b.lifted_sense[u][k][n].trace().real();
      const double p0 = 0.9 * std::max(0.0, room) / cfg.users_of(u);
      for (int v = 0; v < cfg.users_of(u); ++v) {
        const Eigen::VectorXcd& h = ch.h(u, cfg.user_id(u, v), n);
        const double hn = h.norm();
        b.comm[u][v][n] = hn > 0.0
                              ? Eigen::VectorXcd(std::sqrt(p0) / hn * h)
                              : Eigen::VectorXcd::Zero(cfg.array.antenna_count);
        b.lifted_comm[u][v][n] = b.comm[u][v][n] * b.comm[u][v][n].adjoint();
      }
    }
  }
}

struct Alg1Options {
  int max_iters = 100;
  double epsilon = 1e-4;  // relative objective change
  int newton_cap = 4000;
  bool init_if_zero = true;
  bool accelerate = true;  // monotone-safe covariance extrapolation
};

// Alternates chi, psi, and G updates until the decoupled objective settles,
// then extracts rank-one vectors and re-evaluates.
inline FpState run_alg1(BeamformerSet& b, const ChannelRealization& ch,
                        const TrajectorySet& traj, const ScenarioConfig& cfg,
                        const Alg1Options& opt = {}) {
  FpState state = make_fp_state(cfg);
  if (opt.init_if_zero) {
    double total = 0.0;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int v = 0; v < cfg.users_of(u); ++v)
        for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
          total += b.lifted_comm[u][v][n].cwiseAbs().sum();
    if (total == 0.0) init_comm_mrt(b, ch, cfg);
  }

  // The quadratic transform approaches its fixed point additively (steps of
  // order sigma^2 in link power), so plain alternation can need O(SINR)
  // iterations. Extrapolating the covariances along the last step and
  // keeping the result only when the true sum rate improves preserves
  // monotonicity while skipping most of that crawl.
  auto snapshot = [&]() {
    std::vector<Eigen::MatrixXcd> snap;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int v = 0; v < cfg.users_of(u); ++v)
        for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
          snap.push_back(b.lifted_comm[u][v][n]);
    return snap;
  };
  auto restore = [&](const std::vector<Eigen::MatrixXcd>& snap) {
    std::size_t i = 0;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int v = 0; v < cfg.users_of(u); ++v)
        for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
          b.lifted_comm[u][v][n] = snap[i++];
  };
  auto extrapolate = [&](const std::vector<Eigen::MatrixXcd>& cur,
                         const std::vector<Eigen::MatrixXcd>& old,
                         double eta) {
    std::size_t i = 0;
    for (int u = 0; u < cfg.uav_count; ++u)
      for (int v = 0; v < cfg.users_of(u); ++v)
        for (int n = 1; n <= cfg.time_grid.slot_count; ++n, ++i) {
          Eigen::MatrixXcd c = cur[i] + eta * (cur[i] - old[i]);
          c = 0.5 * (c + c.adjoint()).eval();  // PSD projection
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c);
          const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
          b.lifted_comm[u][v][n] = es.eigenvectors() * ev.asDiagonal() *
                                   es.eigenvectors().adjoint();
        }
    // rescale into the per-slot power room and the energy budget
    for (int u = 0; u < cfg.uav_count; ++u) {
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        double room = cfg.power_budget[u];
        for (int k = 0; k < cfg.targets_of(u); ++k)
          room -= b.lifted_sense[u][k][n].trace().real();
        double p = 0.0;
        for (int v = 0; v < cfg.users_of(u); ++v)
          p += b.lifted_comm[u][v][n].trace().real();
        if (p > room) {
          const double s = std::max(0.0, room) * (1.0 - 1e-9) / p;
          for (int v = 0; v < cfg.users_of(u); ++v)
            b.lifted_comm[u][v][n] *= s;
        }
      }
      const auto led = compute_energy_ledger(b, traj, cfg);
      if (led.margin[u] < 0.0) {
        double ce = 0.0;
        const double tau = cfg.time_grid.slot_length();
        for (int v = 0; v < cfg.users_of(u); ++v)
          for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
            ce += tau * b.lifted_comm[u][v][n].trace().real();
        const double s =
            ce > 0.0 ? std::max(0.0, ce + led.margin[u]) * (1.0 - 1e-9) / ce
                     : 0.0;
        for (int v = 0; v < cfg.users_of(u); ++v)
          for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
            b.lifted_comm[u][v][n] *= s;
      }
    }
  };

  std::vector<Eigen::MatrixXcd> g_prev;
  double eta = 1.0;
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    state.iterations = it + 1;
    update_chi(state, b, ch, cfg);
    state.objective_trace.push_back(fp_objective_dual(state, b, ch, cfg));
    update_psi(state, b, ch, cfg);
    const double f_pre = fp_objective(state, b, ch, cfg);
    state.objective_trace.push_back(f_pre);
    const auto g_pre = snapshot();
    const auto sol = solve_G(state, b, ch, traj, cfg, opt.newton_cap);
    state.max_residual = std::max(state.max_residual, sol.max_residual);
    double f = fp_objective(state, b, ch, cfg);
    if (f < f_pre) {  // solver gap noise at a fixed point; keep the better G
      restore(g_pre);
      f = f_pre;
    }

    if (!g_prev.empty() && opt.accelerate) {
      const auto g_cur = snapshot();
      const double rate_cur = compute_rates(b, ch, cfg).sum_rate_bits;
      extrapolate(g_cur, g_prev, eta);
      if (compute_rates(b, ch, cfg).sum_rate_bits > rate_cur) {
        eta = std::min(2.0 * eta, 64.0);
        // refresh the auxiliaries so the recorded objective is the rate
        update_chi(state, b, ch, cfg);
        update_psi(state, b, ch, cfg);
        f = fp_objective(state, b, ch, cfg);
      } else {
        restore(g_cur);
        eta = 1.0;
      }
    }
    g_prev = snapshot();

    state.objective_trace.push_back(f);
    if (std::abs(f - prev) < opt.epsilon * std::max(1.0, std::abs(prev))) {
      prev = f;
      break;
    }
    prev = f;
  }
  state.relaxed_objective = prev;

  for (int u = 0; u < cfg.uav_count; ++u)
    for (int v = 0; v < cfg.users_of(u); ++v)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const auto r = rank_one_extract(b.lifted_comm[u][v][n], 1e-6);
        b.comm[u][v][n] = r.vector;
        b.lifted_comm[u][v][n] = r.vector * r.vector.adjoint();
        if (b.lifted_comm[u][v][n].trace().real() > 1e-12)
          state.min_extraction_quality =
              std::min(state.min_extraction_quality, r.quality);
      }
  update_chi(state, b, ch, cfg);
  update_psi(state, b, ch, cfg);
  state.extracted_objective = fp_objective(state, b, ch, cfg);
  return state;
}

}  // namespace isac
