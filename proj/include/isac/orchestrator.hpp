// SPDX-License-Identifier: Apache-2.0
//
// Outer block-coordinate loop: communication beams, sensing beams, and
// (optionally) the trajectory are optimized in turn until the extracted sum
// rate settles. Also provides the comparison baselines and parameter sweeps.
#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isac/comm_beamforming.hpp"
#include "isac/sensing_beamforming.hpp"
#include "isac/trajectory_rl.hpp"

namespace isac {

enum class TrajectoryMode { Frozen, Ddpg };
enum class BaselineKind { Twobf, Bfwot, RandomPolicy };
enum class RunStatus { Converged, IterationLimit, Infeasible, Error };

struct BcdOptions {
  int bcd_iters = 10;
  double epsilon_outer = 1e-3;  // relative sum-rate change; inf => one pass
  TrajectoryMode trajectory_mode = TrajectoryMode::Frozen;
  Alg1Options alg1;
  Alg2Options alg2;
  DdpgConfig ddpg;
  int finetune_episodes = 50;  // per outer iteration after the first
  int random_episodes = 100;   // episodes averaged by the random baseline
  std::uint64_t seed = 1;
  // Optional feasible starting beams (e.g. the previous point of an
  // ascending sweep); replaces the minimal sensing initialization.
  const BeamformerSet* warm_start = nullptr;
};

struct OuterIterationLog {
  double sum_rate_bits = 0.0;
  double min_crb_margin = std::numeric_limits<double>::infinity();
  std::vector<double> energy_margin;
  int alg1_iterations = 0;
  int alg2_iterations = 0;
  double wall_seconds = 0.0;
};

struct BcdReport {
  RunStatus status = RunStatus::Error;
  std::string message;
  std::vector<OuterIterationLog> outer;
  std::vector<FpState> comm_states;   // one per outer iteration
  std::vector<ScaState> sense_states; // one per outer iteration (if targets)
  std::vector<double> episode_reward; // RL training curve, if any
  std::vector<int> episode_violations;
  TrajectorySet trajectory;
  BeamformerSet beams;
  double sum_rate_bits = 0.0;
  double min_crb = 0.0;  // worst (largest) CRB across targets/slots
  double rollout_reward = std::numeric_limits<double>::quiet_NaN();
  KinematicsReport kinematics;
};

namespace detail {

inline double min_gamma(const ScenarioConfig& cfg) {
  double g = std::numeric_limits<double>::infinity();
  for (const auto& per_uav : cfg.crb_threshold)
    for (double v : per_uav) g = std::min(g, v);
  return g;
}

inline double min_crb_margin(const CrbReport& crb, const ScenarioConfig& cfg) {
  double m = std::numeric_limits<double>::infinity();
  for (int u = 0; u < cfg.uav_count; ++u)
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n)
        m = std::min(m, cfg.gamma(u, k, n) - crb.entries[u][k][n].crb);
  return m;
}

inline void fill_iteration_log(OuterIterationLog& log, const BeamformerSet& b,
                               const ChannelRealization& ch,
                               const TrajectorySet& traj,
                               const ScenarioConfig& cfg) {
  log.sum_rate_bits = compute_rates(b, ch, cfg).sum_rate_bits;
  if (cfg.target_count() > 0)
    log.min_crb_margin = min_crb_margin(compute_crb(b, ch, cfg), cfg);
  const auto ledger = compute_energy_ledger(b, traj, cfg);
  log.energy_margin = ledger.margin;
}

}  // namespace detail

// Uniform-power beams used by the TWOBF baseline: MRT toward each user and
// the minimal-error direction toward each target, equal power per link.
inline void init_uniform_beams(BeamformerSet& b, const ChannelRealization& ch,
                               const ScenarioConfig& cfg) {
  init_comm_mrt(b, ch, cfg);
  for (int u = 0; u < cfg.uav_count; ++u) {
    const double p0 =
        cfg.power_budget[u] / (2.0 * (cfg.users_of(u) + cfg.targets_of(u)));
    for (int k = 0; k < cfg.targets_of(u); ++k)
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        const Eigen::MatrixXcd& abar = ch.echo_deriv[u][k][n];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
            (abar.adjoint() * abar).eval());
        const int last = cfg.array.antenna_count - 1;
        b.sense[u][k][n] = std::sqrt(p0) * es.eigenvectors().col(last);
        b.lifted_sense[u][k][n] = b.sense[u][k][n] * b.sense[u][k][n].adjoint();
      }
  }
}

inline BcdReport run_bcd(const ScenarioConfig& cfg, const BcdOptions& opt = {}) {
  BcdReport report;
  TrajectorySet traj = straight_line_trajectory(cfg);
  ChannelRealization ch = sample_channels(cfg, traj, opt.seed);
  BeamformerSet beams = BeamformerSet::zeros(cfg);

  // best iterate retained: RL trajectory moves are not monotone
  double best_rate = -std::numeric_limits<double>::infinity();
  AgentSnapshot agent;

  try {
    if (opt.warm_start)
      beams = *opt.warm_start;
    else if (cfg.target_count() > 0)
      init_sense_minimal(beams, ch, cfg);
    double prev_rate = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.bcd_iters; ++it) {
      const auto t0 = std::chrono::steady_clock::now();
      OuterIterationLog log;

      Alg1Options a1 = opt.alg1;
      a1.init_if_zero = true;
      const FpState fp = run_alg1(beams, ch, traj, cfg, a1);
      report.comm_states.push_back(fp);
      log.alg1_iterations = fp.iterations;

      if (cfg.target_count() > 0) {
        Alg2Options a2 = opt.alg2;
        a2.init_if_zero = false;
        const ScaState sca = run_alg2(beams, ch, traj, cfg, a2);
        report.sense_states.push_back(sca);
        log.alg2_iterations = sca.iterations;
      }

      detail::fill_iteration_log(log, beams, ch, traj, cfg);
      const bool beams_settled =
          std::isinf(opt.epsilon_outer) ||
          std::abs(log.sum_rate_bits - prev_rate) <
              opt.epsilon_outer * std::max(1.0, std::abs(log.sum_rate_bits));
      prev_rate = log.sum_rate_bits;

      if (log.sum_rate_bits >= best_rate) {
        best_rate = log.sum_rate_bits;
        report.trajectory = traj;
        report.beams = beams;
      }

      // The trajectory move is proposed only once the beam chain has settled
      // on the current path, and accepted only if it improves the evaluated
      // rate under the current beams. Rejected proposals leave the run
      // identical to pure beamforming alternation.
      bool accepted_move = false;
      if (beams_settled && opt.trajectory_mode == TrajectoryMode::Ddpg &&
          it + 1 < opt.bcd_iters) {
        DdpgConfig dc = opt.ddpg;
        if (agent.valid()) dc.episodes = opt.finetune_episodes;
        RlEnvironment env(cfg, beams, opt.seed);
        const auto tr =
            train(env, dc, derive_seed(opt.seed, 0x7261, it, 0), &agent);
        report.episode_reward.insert(report.episode_reward.end(),
                                     tr.episode_reward.begin(),
                                     tr.episode_reward.end());
        report.episode_violations.insert(report.episode_violations.end(),
                                         tr.episode_violations.begin(),
                                         tr.episode_violations.end());
        RlEnvironment eval(cfg, beams, opt.seed);
        const auto ro =
            rollout(agent.actor, eval, agent.penalty, agent.penalty);
        const auto ch_new = sample_channels(cfg, ro.trajectory, opt.seed);
        const double rate_new =
            compute_rates(beams, ch_new, cfg).sum_rate_bits;
        const bool crb_ok =
            cfg.target_count() == 0 ||
            detail::min_crb_margin(compute_crb(beams, ch_new, cfg), cfg) >=
                -1e-6 * detail::min_gamma(cfg);
        if (rate_new > log.sum_rate_bits && crb_ok) {
          traj = ro.trajectory;
          ch = ch_new;
          accepted_move = true;
        }
      }

      log.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      report.outer.push_back(log);

      if (beams_settled && !accepted_move) {
        report.status = RunStatus::Converged;
        break;
      }
    }
    if (report.status != RunStatus::Converged)
      report.status = RunStatus::IterationLimit;
  } catch (const InfeasibleError& e) {
    report.status = RunStatus::Infeasible;
    report.message = e.what();
    report.trajectory = traj;
    report.beams = beams;
    return report;
  }

  // final evaluation on the retained best iterate
  const auto final_ch = sample_channels(cfg, report.trajectory, opt.seed);
  report.sum_rate_bits =
      compute_rates(report.beams, final_ch, cfg).sum_rate_bits;
  if (cfg.target_count() > 0)
    report.min_crb = compute_crb(report.beams, final_ch, cfg).max_crb();
  report.kinematics = validate_kinematics(report.trajectory, cfg);
  return report;
}

inline BcdReport run_baseline(BaselineKind kind, const ScenarioConfig& cfg,
                              const BcdOptions& opt = {}) {
  if (kind == BaselineKind::Bfwot) {
    BcdOptions o = opt;
    o.trajectory_mode = TrajectoryMode::Frozen;
    return run_bcd(cfg, o);
  }

  // TWOBF and the random policy share uniform, unoptimized beams.
  BcdReport report;
  TrajectorySet traj = straight_line_trajectory(cfg);
  const ChannelRealization ch0 = sample_channels(cfg, traj, opt.seed);
  BeamformerSet beams = BeamformerSet::zeros(cfg);
  init_uniform_beams(beams, ch0, cfg);
  report.beams = beams;

  if (kind == BaselineKind::Twobf) {
    RlEnvironment env(cfg, beams, opt.seed);
    AgentSnapshot agent;
    const auto tr =
        train(env, opt.ddpg, derive_seed(opt.seed, 0x7262, 0, 0), &agent);
    report.episode_reward = tr.episode_reward;
    report.episode_violations = tr.episode_violations;
    RlEnvironment eval(cfg, beams, opt.seed);
    const auto ro = rollout(agent.actor, eval, agent.penalty, 0.0);
    report.rollout_reward = ro.total_reward;
    traj = ro.trajectory;
  } else {  // RandomPolicy: uniform random boxed actions, mean over episodes
    RlEnvironment env(cfg, beams, opt.seed);
    std::mt19937_64 rng(derive_seed(opt.seed, 0x7263, 0, 0));
    std::uniform_real_distribution<double> u(-0.999, 0.999);
    const double xi = opt.ddpg.penalty;
    double reward_sum = 0.0;
    for (int ep = 0; ep < opt.random_episodes; ++ep) {
      env.reset();
      double total_rate = 0.0;
      int violations = 0;
      double reward = 0.0;
      for (int n = 1; n <= cfg.time_grid.slot_count; ++n) {
        Eigen::VectorXd raw(env.action_dim());
        for (int i = 0; i < raw.size(); ++i) raw(i) = std::atanh(u(rng));
        const auto r = env.step(squash_action(raw, env.box(), cfg.uav_count),
                                std::max(xi, 0.0), 0.0);
        total_rate += r.slot_sum_rate;
        if (r.violations.any()) ++violations;
        reward += r.reward;
      }
      // without an explicit penalty, apply the same 10x-mean-rate calibration
      reward_sum +=
          xi > 0.0 ? reward
                   : total_rate - 10.0 *
                                      (total_rate / cfg.time_grid.slot_count) *
                                      violations;
      if (ep == 0) traj = env.trajectory();  // report the first episode
    }
    report.rollout_reward = reward_sum / opt.random_episodes;
  }

  report.trajectory = traj;
  const auto ch = sample_channels(cfg, traj, opt.seed);
  report.sum_rate_bits = compute_rates(beams, ch, cfg).sum_rate_bits;
  if (cfg.target_count() > 0)
    report.min_crb = compute_crb(beams, ch, cfg).max_crb();
  report.kinematics = validate_kinematics(traj, cfg);
  OuterIterationLog log;
  detail::fill_iteration_log(log, beams, ch, traj, cfg);
  report.outer.push_back(log);
  report.status = RunStatus::Converged;
  return report;
}

enum class SweepAxis { CrbThreshold, PowerBudget };

struct SweepRow {
  double axis_value = 0.0;
  double sum_rate_bits = 0.0;
  double min_crb = 0.0;
  RunStatus status = RunStatus::Error;
};

inline std::vector<SweepRow> sweep(const ScenarioConfig& cfg, SweepAxis axis,
                                   const std::vector<double>& values,
                                   const BcdOptions& opt = {}) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1])
      throw ValidationError("sweep values must be ascending");
  std::vector<SweepRow> rows;
  // ascending grids make each solution feasible at the next point, so
  // warm-starting there keeps the trend monotone by construction
  BeamformerSet warm;
  bool have_warm = false;
  for (double v : values) {
    ScenarioConfig c = cfg;
    if (axis == SweepAxis::CrbThreshold) {
      for (auto& per_uav : c.crb_threshold)
        for (auto& g : per_uav) g = v;
    } else {
      for (auto& p : c.power_budget) p = v;
    }
    SweepRow row;
    row.axis_value = v;
    try {
      BcdOptions o = opt;
      if (have_warm) o.warm_start = &warm;
      const auto rep = run_bcd(c, o);
      row.sum_rate_bits = rep.sum_rate_bits;
      row.min_crb = rep.min_crb;
      row.status = rep.status;
      if (rep.status == RunStatus::Converged ||
          rep.status == RunStatus::IterationLimit) {
        warm = rep.beams;
        have_warm = true;
      }
    } catch (const InfeasibleError&) {
      row.status = RunStatus::Infeasible;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace isac
