// SPDX-License-Identifier: Apache-2.0
//
// DDPG trajectory search under frozen beamformers. A centralized actor emits
// per-UAV (speed, heading, altitude) actions each slot; constraint-violating
// moves are cancelled (the UAV holds position) and penalized, and a
// reachability guard substitutes a docking move so every episode ends exactly
// at the prescribed final position.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isac/channel.hpp"
#include "isac/metrics.hpp"
#include "isac/scenario.hpp"

namespace isac {

// ---------------------------------------------------------------------------
// Small dense MLP with tanh hidden layers, manual backprop, and Adam.

struct Mlp {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  static Mlp make(const std::vector<int>& dims, std::mt19937_64& rng) {
    if (dims.size() < 2) throw ValidationError("MLP needs at least two dims");
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      Eigen::MatrixXd wl(dims[l + 1], dims[l]);
      Eigen::VectorXd bl(dims[l + 1]);
      for (int i = 0; i < wl.rows(); ++i)
        for (int j = 0; j < wl.cols(); ++j) wl(i, j) = u(rng);
      for (int i = 0; i < bl.size(); ++i) bl(i) = u(rng);
      net.w.push_back(std::move(wl));
      net.b.push_back(std::move(bl));
    }
    return net;
  }

  static Mlp zeros_like(const Mlp& other) {
    Mlp net;
    for (std::size_t l = 0; l < other.w.size(); ++l) {
      net.w.push_back(Eigen::MatrixXd::Zero(other.w[l].rows(), other.w[l].cols()));
      net.b.push_back(Eigen::VectorXd::Zero(other.b[l].size()));
    }
    return net;
  }

  int layer_count() const { return static_cast<int>(w.size()); }

  struct Cache {
    std::vector<Eigen::VectorXd> post;  // post[0] = input, post[l] = activation
  };

  // tanh on hidden layers, linear output
  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache* cache = nullptr) const {
    Eigen::VectorXd a = x;
    if (cache) cache->post = {a};
    for (int l = 0; l < layer_count(); ++l) {
      Eigen::VectorXd z = w[l] * a + b[l];
      a = (l + 1 < layer_count()) ? z.array().tanh().matrix() : z;
      if (cache) cache->post.push_back(a);
    }
    return a;
  }

  // Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& dout,
                           Mlp& grad) const {
    Eigen::VectorXd delta = dout;
    for (int l = layer_count() - 1; l >= 0; --l) {
      if (l + 1 < layer_count()) {
        const auto& a = cache.post[l + 1];
        delta = (delta.array() * (1.0 - a.array().square())).matrix();
      }
      grad.w[l] += delta * cache.post[l].transpose();
      grad.b[l] += delta;
      delta = w[l].transpose() * delta;
    }
    return delta;
  }

  int parameter_count() const {
    int n = 0;
    for (int l = 0; l < layer_count(); ++l)
      n += static_cast<int>(w[l].size() + b[l].size());
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(parameter_count());
    int at = 0;
    for (int l = 0; l < layer_count(); ++l) {
      for (int j = 0; j < w[l].cols(); ++j)
        for (int i = 0; i < w[l].rows(); ++i) out(at++) = w[l](i, j);
      for (int i = 0; i < b[l].size(); ++i) out(at++) = b[l](i);
    }
    return out;
  }

  void unflatten(const Eigen::VectorXd& v) {
    if (v.size() != parameter_count())
      throw ValidationError("parameter vector size mismatch");
    int at = 0;
    for (int l = 0; l < layer_count(); ++l) {
      for (int j = 0; j < w[l].cols(); ++j)
        for (int i = 0; i < w[l].rows(); ++i) w[l](i, j) = v(at++);
      for (int i = 0; i < b[l].size(); ++i) b[l](i) = v(at++);
    }
  }
};

inline void soft_update(Mlp& target, const Mlp& online, double delta) {
  if (target.layer_count() != online.layer_count())
    throw ValidationError("soft_update: layer count mismatch");
  for (int l = 0; l < target.layer_count(); ++l) {
    if (target.w[l].rows() != online.w[l].rows() ||
        target.w[l].cols() != online.w[l].cols())
      throw ValidationError("soft_update: parameter shape mismatch");
    target.w[l] = delta * online.w[l] + (1.0 - delta) * target.w[l];
    target.b[l] = delta * online.b[l] + (1.0 - delta) * target.b[l];
  }
}

inline double critic_target(double reward, double gamma, double q_next,
                            bool terminal = false) {
  return reward + (terminal ? 0.0 : gamma * q_next);
}

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Mlp m, v;
  int t = 0;

  explicit Adam(const Mlp& shape, double lr_)
      : lr(lr_), m(Mlp::zeros_like(shape)), v(Mlp::zeros_like(shape)) {}

  void step(Mlp& params, const Mlp& grad) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (int l = 0; l < params.layer_count(); ++l) {
      m.w[l] = beta1 * m.w[l] + (1.0 - beta1) * grad.w[l];
      v.w[l] = beta2 * v.w[l].array().matrix() +
               (1.0 - beta2) * grad.w[l].array().square().matrix();
      params.w[l].array() -=
          lr * (m.w[l].array() / c1) / ((v.w[l].array() / c2).sqrt() + eps);
      m.b[l] = beta1 * m.b[l] + (1.0 - beta1) * grad.b[l];
      v.b[l] = beta2 * v.b[l].array().matrix() +
               (1.0 - beta2) * grad.b[l].array().square().matrix();
      params.b[l].array() -=
          lr * (m.b[l].array() / c1) / ((v.b[l].array() / c2).sqrt() + eps);
    }
  }
};

// ---------------------------------------------------------------------------
// Replay buffer and exploration noise.

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;  // boxed units
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1600) : capacity_(capacity) {}

  void push(Transition t) {
    if (store_.size() == capacity_) store_.pop_front();  // oldest first
    store_.push_back(std::move(t));
  }
  std::size_t size() const { return store_.size(); }
  const Transition& at(std::size_t i) const { return store_[i]; }

  std::vector<const Transition*> sample(std::size_t batch,
                                        std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, store_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&store_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> store_;
};

// Ornstein-Uhlenbeck process (correlated) with a Gaussian fallback.
struct NoiseProcess {
  double theta = 0.15;
  double sigma = 0.2;
  bool gaussian = false;
  Eigen::VectorXd state;

  void reset(int dim) { state = Eigen::VectorXd::Zero(dim); }

  const Eigen::VectorXd& sample(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    if (gaussian) {
      for (int i = 0; i < state.size(); ++i) state(i) = sigma * n(rng);
    } else {
      for (int i = 0; i < state.size(); ++i)
        state(i) += -theta * state(i) + sigma * n(rng);
    }
    return state;
  }
};

// ---------------------------------------------------------------------------
// Environment: kinematics, per-slot channel resampling, penalized reward.

struct ViolationReport {
  bool crb = false;        // sensing error bound exceeded
  bool power = false;      // per-slot transmit power over budget
  bool energy = false;     // cumulative energy over budget
  bool endpoint = false;   // proposed move strands the UAV away from o_f
  bool boundary = false;   // outside the service area
  bool separation = false; // closer than the minimum UAV spacing
  bool cancelled = false;  // the proposed action was replaced

  bool any() const {
    return crb || power || energy || endpoint || boundary || separation ||
           cancelled;
  }
};

inline double reward_fn(double slot_sum_rate, const ViolationReport& v,
                        double xi) {
  return slot_sum_rate - (v.any() ? xi : 0.0);
}

// Action box per UAV: a_h in [10, 20] m/s, theta in [-5pi/12, 5pi/12],
// H in [altitude_min, altitude_max].
struct ActionBox {
  double speed_lo = 10.0, speed_hi = 20.0;
  double heading_half = 5.0 * kPi / 12.0;
  double alt_lo = 150.0, alt_hi = 200.0;
};

inline Eigen::VectorXd squash_action(const Eigen::VectorXd& raw,
                                     const ActionBox& box, int uav_count) {
  Eigen::VectorXd a(3 * uav_count);
  for (int u = 0; u < uav_count; ++u) {
    a(3 * u + 0) = 0.5 * (box.speed_lo + box.speed_hi) +
                   0.5 * (box.speed_hi - box.speed_lo) * std::tanh(raw(3 * u + 0));
    a(3 * u + 1) = box.heading_half * std::tanh(raw(3 * u + 1));
    a(3 * u + 2) = 0.5 * (box.alt_lo + box.alt_hi) +
                   0.5 * (box.alt_hi - box.alt_lo) * std::tanh(raw(3 * u + 2));
  }
  return a;
}

inline Eigen::VectorXd clamp_action(Eigen::VectorXd a, const ActionBox& box,
                                    int uav_count) {
  for (int u = 0; u < uav_count; ++u) {
    a(3 * u + 0) = std::clamp(a(3 * u + 0), box.speed_lo, box.speed_hi);
    a(3 * u + 1) = std::clamp(a(3 * u + 1), -box.heading_half, box.heading_half);
    a(3 * u + 2) = std::clamp(a(3 * u + 2), box.alt_lo, box.alt_hi);
  }
  return a;
}

// Half-range scaling so one unit of noise spans the same fraction of each box.
inline Eigen::VectorXd action_noise_scale(const ActionBox& box, int uav_count) {
  Eigen::VectorXd s(3 * uav_count);
  for (int u = 0; u < uav_count; ++u) {
    s(3 * u + 0) = 0.5 * (box.speed_hi - box.speed_lo);
    s(3 * u + 1) = box.heading_half;
    s(3 * u + 2) = 0.5 * (box.alt_hi - box.alt_lo);
  }
  return s;
}

class RlEnvironment {
 public:
  RlEnvironment(const ScenarioConfig& cfg, const BeamformerSet& beams,
                std::uint64_t channel_seed)
      : cfg_(cfg), beams_(beams), channel_seed_(channel_seed) {
    box_.alt_lo = cfg.altitude_min;
    box_.alt_hi = cfg.altitude_max;
    box_.speed_hi = std::min(box_.speed_hi, cfg.max_speed);
    comm_links_ = 0;
    sense_links_ = 0;
    for (int u = 0; u < cfg.uav_count; ++u) {
      comm_links_ += cfg.users_of(u);
      sense_links_ += cfg.targets_of(u);
    }
    reset();
  }

  const ScenarioConfig& config() const { return cfg_; }
  const ActionBox& box() const { return box_; }
  int action_dim() const { return 3 * cfg_.uav_count; }
  int state_dim() const {
    return 3 * cfg_.uav_count + 2 * cfg_.user_count() + 2 * cfg_.target_count() +
           comm_links_ + sense_links_ + 1;
  }

  Eigen::VectorXd reset() {
    positions_.assign(cfg_.uav_count, {cfg_.start_position});
    energy_used_.assign(cfg_.uav_count, 0.0);
    slot_ = 0;
    return observe();
  }

  struct StepResult {
    Eigen::VectorXd state;
    double reward = 0.0;
    bool terminal = false;
    ViolationReport violations;
    double slot_sum_rate = 0.0;
  };

  // Advances one slot. `action` must already be inside the box.
  StepResult step(const Eigen::VectorXd& action, double xi,
                  double endpoint_weight) {
    const int n = slot_ + 1;  // slot being flown
    const int n_slots = cfg_.time_grid.slot_count;
    const double tau = cfg_.time_grid.slot_length();
    StepResult out;

    std::vector<Eigen::Vector3d> proposed(cfg_.uav_count);
    double endpoint_miss = 0.0;
    for (int u = 0; u < cfg_.uav_count; ++u) {
      const Eigen::Vector3d cur = positions_[u].back();
      const double ah = action(3 * u + 0);
      const double th = action(3 * u + 1);
      Eigen::Vector3d p(cur.x() + tau * ah * std::cos(th),
                        cur.y() + tau * ah * std::sin(th), action(3 * u + 2));
      // the climb rate is limited by whatever the speed budget leaves over
      const double dz_max = std::sqrt(std::max(
          0.0, std::pow(cfg_.max_speed * tau, 2) - std::pow(ah * tau, 2)));
      p.z() = std::clamp(p.z(), cur.z() - dz_max, cur.z() + dz_max);
      bool replace = false;
      if (p.x() < 0.0 || p.x() > cfg_.area_size || p.y() < 0.0 ||
          p.y() > cfg_.area_size) {
        out.violations.boundary = true;
        replace = true;
      }
      if (!reachable(p, n)) {
        out.violations.endpoint = true;
        replace = true;
      }
      if (replace) {
        out.violations.cancelled = true;
        p = cur;  // hold position
        if (!reachable(p, n)) p = dock_step(cur, n);  // forced docking move
      }
      if (n == n_slots) {
        // exact landing; the guard keeps o_f within one slot's reach
        endpoint_miss += (p - cfg_.final_position).norm();
        if (endpoint_miss > 1e-9) {
          out.violations.endpoint = true;
          out.violations.cancelled = true;
        }
        p = cfg_.final_position;
      }
      proposed[u] = p;
    }

    // pairwise spacing (endpoints exempt): a violating follower holds instead
    if (n < n_slots)
      for (int u = 1; u < cfg_.uav_count; ++u)
        for (int up = 0; up < u; ++up)
          if ((proposed[u] - proposed[up]).norm() < cfg_.min_uav_distance) {
            out.violations.separation = true;
            proposed[u] = positions_[u].back();
            out.violations.cancelled = true;
          }

    for (int u = 0; u < cfg_.uav_count; ++u) positions_[u].push_back(proposed[u]);
    slot_ = n;

    // rates, sensing bound, and energy at the new geometry
    out.slot_sum_rate = slot_rates(n, &out.violations);
    for (int u = 0; u < cfg_.uav_count; ++u) {
      const Eigen::Vector3d prev = positions_[u][n - 1];
      const Eigen::Vector3d cur = positions_[u][n];
      UavState st;
      st.position = cur;
      st.horizontal_speed =
          std::hypot(cur.x() - prev.x(), cur.y() - prev.y()) / tau;
      st.heading = std::atan2(cur.y() - prev.y(), cur.x() - prev.x());
      st.vertical_speed = (cur.z() - prev.z()) / tau;
      double e = compute_flight_energy(st, cfg_.flight, tau);
      double p_slot = 0.0;
      for (int v = 0; v < cfg_.users_of(u); ++v)
        p_slot += beams_.lifted_comm[u][v][n].trace().real();
      for (int k = 0; k < cfg_.targets_of(u); ++k)
        p_slot += beams_.lifted_sense[u][k][n].trace().real();
      if (p_slot > cfg_.power_budget[u] * (1.0 + 1e-9))
        out.violations.power = true;
      energy_used_[u] += e + tau * p_slot;
      if (energy_used_[u] > cfg_.energy_budget[u] * (1.0 + 1e-9))
        out.violations.energy = true;
    }

    out.terminal = (n == n_slots);
    out.reward = reward_fn(out.slot_sum_rate, out.violations, xi);
    if (out.terminal && endpoint_weight > 0.0)
      out.reward -= endpoint_weight * endpoint_miss /
                    (cfg_.max_speed * tau * n_slots);
    out.state = observe();
    return out;
  }

  TrajectorySet trajectory() const {
    TrajectorySet t;
    t.positions = positions_;
    return t;
  }

 private:
  bool reachable(const Eigen::Vector3d& p, int n) const {
    const int remaining = cfg_.time_grid.slot_count - n;
    const double d = (p - cfg_.final_position).norm();
    return d <= remaining * cfg_.time_grid.slot_length() * cfg_.max_speed +
                    1e-9;
  }

  Eigen::Vector3d dock_step(const Eigen::Vector3d& cur, int /*n*/) const {
    const double tau = cfg_.time_grid.slot_length();
    const Eigen::Vector3d to = cfg_.final_position - cur;
    const double d = to.norm();
    if (d <= 0.0) return cur;
    return cur + std::min(d, tau * cfg_.max_speed) / d * to;
  }

  // Channel draws are keyed by (slot, node) only, so revisiting a slot with a
  // different geometry reuses the same fading randomness.
  double slot_rates(int n, ViolationReport* viol) const {
    const int m = cfg_.array.antenna_count;
    const double s2 = cfg_.noise_power();
    const double tau = cfg_.time_grid.slot_length();
    std::vector<std::vector<Eigen::VectorXcd>> h(
        cfg_.uav_count, std::vector<Eigen::VectorXcd>(cfg_.user_count()));
    for (int u = 0; u < cfg_.uav_count; ++u)
      for (int v = 0; v < cfg_.user_count(); ++v) {
        std::mt19937_64 rng(derive_seed(channel_seed_, n, u, v));
        const auto geo =
            link_geometry(positions_[u][n], cfg_.user_positions[v]);
        h[u][v] = sample_comm_channel(geo, cfg_.los, cfg_.array, rng);
      }
    double sum = 0.0;
    for (int u = 0; u < cfg_.uav_count; ++u)
      for (int v = 0; v < cfg_.users_of(u); ++v) {
        const int gv = cfg_.user_id(u, v);
        double signal = 0.0, interf = s2;
        for (int up = 0; up < cfg_.uav_count; ++up) {
          const Eigen::VectorXcd& hu = h[up][gv];
          for (int vp = 0; vp < cfg_.users_of(up); ++vp) {
            const double p =
                (hu.adjoint() * beams_.lifted_comm[up][vp][n] * hu).real()(0);
            if (up == u && vp == v)
              signal = p;
            else
              interf += p;
          }
          for (int k = 0; k < cfg_.targets_of(up); ++k)
            interf +=
                (hu.adjoint() * beams_.lifted_sense[up][k][n] * hu).real()(0);
        }
        sum += tau * std::log2(1.0 + signal / interf);
      }
    if (viol) {
      for (int u = 0; u < cfg_.uav_count; ++u)
        for (int k = 0; k < cfg_.targets_of(u); ++k) {
          const int gk = cfg_.target_id(u, k);
          const auto geo =
              link_geometry(positions_[u][n], cfg_.target_position(gk, n));
          const double beta = cfg_.rcs(gk) / (2.0 * geo.slant_distance);
          const Eigen::MatrixXcd abar =
              echo_dyad_derivative(geo, cfg_.los, cfg_.array);
          const double tr =
              ((abar.adjoint() * abar) * beams_.lifted_sense[u][k][n])
                  .trace()
                  .real();
          const double crb = tr > 0.0
                                 ? s2 / (2.0 * beta * beta * tr)
                                 : std::numeric_limits<double>::infinity();
          if (crb > cfg_.gamma(u, k, n) * (1.0 + 1e-9)) viol->crb = true;
        }
      (void)m;
    }
    return sum;
  }

  Eigen::VectorXd observe() const {
    const int n_slots = cfg_.time_grid.slot_count;
    const int beam_slot = std::min(slot_ + 1, n_slots);
    Eigen::VectorXd s(state_dim());
    int at = 0;
    auto norm_xy = [&](double v) { return 2.0 * v / cfg_.area_size - 1.0; };
    for (int u = 0; u < cfg_.uav_count; ++u) {
      const Eigen::Vector3d p = positions_[u].back();
      s(at++) = norm_xy(p.x());
      s(at++) = norm_xy(p.y());
      s(at++) = 2.0 * (p.z() - cfg_.altitude_min) /
                    (cfg_.altitude_max - cfg_.altitude_min) -
                1.0;
    }
    for (const auto& p : cfg_.user_positions) {
      s(at++) = norm_xy(p.x());
      s(at++) = norm_xy(p.y());
    }
    for (int gk = 0; gk < cfg_.target_count(); ++gk) {
      const Eigen::Vector3d p = cfg_.target_position(gk, std::max(slot_, 1));
      s(at++) = norm_xy(p.x());
      s(at++) = norm_xy(p.y());
    }
    for (int u = 0; u < cfg_.uav_count; ++u) {
      for (int v = 0; v < cfg_.users_of(u); ++v)
        s(at++) = 2.0 *
                      std::clamp(beams_.lifted_comm[u][v][beam_slot].trace().real() /
                                     cfg_.power_budget[u],
                                 0.0, 1.0) -
                  1.0;
      for (int k = 0; k < cfg_.targets_of(u); ++k)
        s(at++) = 2.0 *
                      std::clamp(beams_.lifted_sense[u][k][beam_slot].trace().real() /
                                     cfg_.power_budget[u],
                                 0.0, 1.0) -
                  1.0;
    }
    s(at++) = 2.0 * static_cast<double>(slot_) / n_slots - 1.0;
    return s;
  }

  ScenarioConfig cfg_;
  BeamformerSet beams_;
  std::uint64_t channel_seed_;
  ActionBox box_;
  int comm_links_ = 0, sense_links_ = 0;
  std::vector<std::vector<Eigen::Vector3d>> positions_;
  std::vector<double> energy_used_;
  int slot_ = 0;
};

// ---------------------------------------------------------------------------
// Agent.

struct DdpgConfig {
  double gamma = 0.95;        // discount
  double tau_soft = 0.01;     // target soft-update rate delta
  double penalty = -1.0;      // xi; <= 0 requests auto-calibration
  double endpoint_weight = -1.0;  // terminal shaping; < 0 copies xi
  int batch_size = 32;
  std::size_t buffer_capacity = 1600;
  int episodes = 300;
  std::vector<int> hidden = {128, 128};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  NoiseProcess noise;
  double noise_floor = 0.1;      // final fraction of exploration noise
  double critic_loss_cap = 1e8;  // divergence guard threshold
};

struct TrainResult {
  Mlp actor;
  std::vector<double> episode_reward;
  std::vector<int> episode_violations;
  double penalty_used = 0.0;
};

// Networks carried across training rounds so a caller can fine-tune an
// existing agent instead of restarting from random weights.
struct AgentSnapshot {
  Mlp actor, critic, actor_target, critic_target;
  double penalty = -1.0;  // frozen xi, reused on fine-tune

  bool valid() const { return actor.layer_count() > 0; }
};

struct RolloutResult {
  TrajectorySet trajectory;
  double total_reward = 0.0;
  double sum_rate_bits = 0.0;
};

inline RolloutResult rollout(const Mlp& actor, RlEnvironment& env, double xi,
                             double endpoint_weight) {
  Eigen::VectorXd s = env.reset();
  RolloutResult out;
  const int n_slots = env.config().time_grid.slot_count;
  for (int n = 1; n <= n_slots; ++n) {
    const Eigen::VectorXd a =
        squash_action(actor.forward(s), env.box(), env.config().uav_count);
    const auto r = env.step(a, xi, endpoint_weight);
    out.total_reward += r.reward;
    out.sum_rate_bits += r.slot_sum_rate;
    s = r.state;
  }
  out.trajectory = env.trajectory();
  return out;
}

inline TrainResult train(RlEnvironment& env, const DdpgConfig& cfg,
                         std::uint64_t seed, AgentSnapshot* snapshot = nullptr) {
  if (cfg.batch_size > static_cast<int>(cfg.buffer_capacity))
    throw ValidationError("batch size exceeds buffer capacity");
  std::mt19937_64 rng(derive_seed(seed, 0x0ddb, 0, 0));
  const int sd = env.state_dim();
  const int ad = env.action_dim();
  const int nu = env.config().uav_count;

  std::vector<int> actor_dims = {sd};
  std::vector<int> critic_dims = {sd + ad};
  for (int h : cfg.hidden) {
    actor_dims.push_back(h);
    critic_dims.push_back(h);
  }
  actor_dims.push_back(ad);
  critic_dims.push_back(1);

  Mlp actor = Mlp::make(actor_dims, rng);
  Mlp critic = Mlp::make(critic_dims, rng);
  Mlp actor_t = actor;
  Mlp critic_t = critic;
  if (snapshot && snapshot->valid()) {
    actor = snapshot->actor;
    critic = snapshot->critic;
    actor_t = snapshot->actor_target;
    critic_t = snapshot->critic_target;
  }
  Adam actor_opt(actor, cfg.actor_lr);
  Adam critic_opt(critic, cfg.critic_lr);
  ReplayBuffer buffer(cfg.buffer_capacity);
  NoiseProcess noise = cfg.noise;
  const Eigen::VectorXd nscale = action_noise_scale(env.box(), nu);

  // xi calibration: 10x the mean per-slot sum rate of an untrained greedy
  // episode, frozen for the remainder of training.
  double xi = cfg.penalty;
  if (xi <= 0.0 && snapshot && snapshot->valid() && snapshot->penalty > 0.0)
    xi = snapshot->penalty;
  if (xi <= 0.0) {
    RlEnvironment probe = env;
    const auto r0 = rollout(actor, probe, 0.0, 0.0);
    const double mean_rate =
        r0.sum_rate_bits / env.config().time_grid.slot_count;
    xi = mean_rate > 0.0 ? 10.0 * mean_rate : 1.0;
  }
  const double ew = cfg.endpoint_weight < 0.0 ? xi : cfg.endpoint_weight;

  TrainResult out;
  out.penalty_used = xi;
  int diverged_streak = 0;
  const int n_slots = env.config().time_grid.slot_count;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Eigen::VectorXd s = env.reset();
    noise.reset(ad);
    // linear exploration annealing toward the configured floor
    const double anneal =
        cfg.episodes > 1
            ? 1.0 - (1.0 - cfg.noise_floor) * ep / (cfg.episodes - 1.0)
            : 1.0;
    double ep_reward = 0.0;
    int ep_viol = 0;
    for (int n = 1; n <= n_slots; ++n) {
      Eigen::VectorXd a =
          squash_action(actor.forward(s), env.box(), nu) +
          anneal * nscale.cwiseProduct(noise.sample(rng));
      a = clamp_action(std::move(a), env.box(), nu);
      const auto r = env.step(a, xi, ew);
      ep_reward += r.reward;
      if (r.violations.any()) ++ep_viol;
      buffer.push({s, a, r.reward, r.state, r.terminal});
      s = r.state;

      if (buffer.size() < static_cast<std::size_t>(cfg.batch_size)) continue;
      const auto batch = buffer.sample(cfg.batch_size, rng);

      // critic: MSE against the bootstrapped target
      Mlp cgrad = Mlp::zeros_like(critic);
      double loss = 0.0;
      for (const auto* tr : batch) {
        Eigen::VectorXd sa(sd + ad);
        const Eigen::VectorXd an = squash_action(
            actor_t.forward(tr->next_state), env.box(), nu);
        Eigen::VectorXd sa2(sd + ad);
        sa2 << tr->next_state, an;
        const double y = critic_target(tr->reward, cfg.gamma,
                                       critic_t.forward(sa2)(0), tr->terminal);
        sa << tr->state, tr->action;
        Mlp::Cache cache;
        const double q = critic.forward(sa, &cache)(0);
        const double err = q - y;
        loss += err * err;
        Eigen::VectorXd dq(1);
        dq(0) = 2.0 * err / cfg.batch_size;
        critic.backward(cache, dq, cgrad);
      }
      loss /= cfg.batch_size;
      critic_opt.step(critic, cgrad);
      if (!std::isfinite(loss) || loss > cfg.critic_loss_cap) {
        if (++diverged_streak >= 100)
          throw NumericalError("critic loss diverged for 100 consecutive updates");
      } else {
        diverged_streak = 0;
      }

      // actor: ascend Q(s, squash(actor(s)))
      Mlp agrad = Mlp::zeros_like(actor);
      for (const auto* tr : batch) {
        Mlp::Cache acache;
        const Eigen::VectorXd raw = actor.forward(tr->state, &acache);
        const Eigen::VectorXd ab = squash_action(raw, env.box(), nu);
        Eigen::VectorXd sa(sd + ad);
        sa << tr->state, ab;
        Mlp::Cache ccache;
        critic.forward(sa, &ccache);
        Eigen::VectorXd done(1);
        done(0) = -1.0 / cfg.batch_size;  // maximize Q
        Mlp scratch = Mlp::zeros_like(critic);
        const Eigen::VectorXd dsa = critic.backward(ccache, done, scratch);
        Eigen::VectorXd draw = dsa.tail(ad);
        for (int i = 0; i < ad; ++i) {
          const double t = std::tanh(raw(i));
          draw(i) *= nscale(i) * (1.0 - t * t);
        }
        actor.backward(acache, draw, agrad);
      }
      actor_opt.step(actor, agrad);

      soft_update(actor_t, actor, cfg.tau_soft);
      soft_update(critic_t, critic, cfg.tau_soft);
    }
    out.episode_reward.push_back(ep_reward);
    out.episode_violations.push_back(ep_viol);
  }
  if (snapshot) {
    snapshot->actor = actor;
    snapshot->critic = std::move(critic);
    snapshot->actor_target = std::move(actor_t);
    snapshot->critic_target = std::move(critic_t);
    snapshot->penalty = xi;
  }
  out.actor = std::move(actor);
  return out;
}

}  // namespace isac
