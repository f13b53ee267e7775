#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rffrl/feature_map.hpp"
#include "rffrl/rng.hpp"

namespace rffrl {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  Eigen::VectorXd next_state;
  double reward = 0.0;
  int step_index = 0;
};

struct Trajectory {
  std::vector<Transition> steps;
  int episode_index = 0;

  double total_reward() const {
    double r = 0.0;
    for (const auto& t : steps) r += t.reward;
    return r;
  }
};

/// Episodic environment with dynamics s' = f*(s, a) + eps, eps ~ N(0, sigma^2 I).
/// f* clips its own output so |f*(s, a)|_2 <= output_bound everywhere; the
/// noise is never clipped. Rewards are deterministic, known, and lie in [0, 1].
struct EnvSpec {
  std::string name;
  int state_dim = 0;
  std::vector<Eigen::VectorXd> actions;  // finite action grid
  int horizon = 0;
  double noise_std = 0.0;
  double output_bound = 0.0;  // C
  Eigen::VectorXd state_lo, state_hi;  // box covering reachable states
  Eigen::VectorXd initial_state;
  // When set, the initial state is drawn from this seeded distribution;
  // otherwise initial_state is used as a fixed start.
  std::function<Eigen::VectorXd(std::uint64_t)> sample_initial;

  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> reward;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dynamics_mean;
  // Batched hooks (states as rows, one shared action); loops over rows if unset.
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)> reward_rows;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)> dynamics_mean_rows;

  int action_index(const Eigen::VectorXd& a) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i].size() == a.size() && (actions[i] - a).lpNorm<Eigen::Infinity>() <= 1e-12)
        return static_cast<int>(i);
    return -1;
  }
};

inline Eigen::VectorXd clip_to_ball(Eigen::VectorXd v, double radius) {
  const double n = v.norm();
  if (n > radius) v *= radius / n;
  return v;
}

inline double wrap_angle(double theta) {
  return theta - kTwoPi * std::floor((theta + kPi) / kTwoPi);
}

inline Eigen::VectorXd env_reset(const EnvSpec& spec, std::uint64_t seed) {
  if (spec.sample_initial) return spec.sample_initial(seed);
  return spec.initial_state;
}

inline Eigen::VectorXd true_dynamics_eval(const EnvSpec& spec, const Eigen::VectorXd& s,
                                          const Eigen::VectorXd& a) {
  return spec.dynamics_mean(s, a);
}

inline Transition env_step(const EnvSpec& spec, const Eigen::VectorXd& state,
                           const Eigen::VectorXd& action, std::uint64_t noise_seed,
                           int step_index = 0) {
  if (!state.allFinite()) throw std::invalid_argument("env_step: state must be finite");
  if (spec.action_index(action) < 0)
    throw std::invalid_argument("env_step: action is not in the action set of " + spec.name);
  Transition t;
  t.state = state;
  t.action = action;
  t.step_index = step_index;
  Rng rng(noise_seed);
  t.next_state = spec.dynamics_mean(state, action) +
                 spec.noise_std * rng.normal_vector(spec.state_dim);
  t.reward = spec.reward(state, action);
  if (!(t.reward >= 0.0 && t.reward <= 1.0))
    throw std::logic_error("env_step: reward outside [0, 1] in " + spec.name);
  return t;
}

// Index-addressed step for interior loops; the action is valid by construction.
inline Transition env_step_idx(const EnvSpec& spec, const Eigen::VectorXd& state,
                               int action_idx, Rng& rng, int step_index) {
  const Eigen::VectorXd& action = spec.actions.at(action_idx);
  Transition t;
  t.state = state;
  t.action = action;
  t.step_index = step_index;
  t.next_state = spec.dynamics_mean(state, action) +
                 spec.noise_std * rng.normal_vector(spec.state_dim);
  t.reward = spec.reward(state, action);
  return t;
}

// --- built-in environments ---------------------------------------------------

struct SyntheticLinearParams {
  int state_dim = 2;
  int feature_dim = 48;           // d_psi of the realizable class
  double feature_bandwidth = 1.0; // bandwidth of psi on concatenated (s, a)
  int n_actions = 5;
  double action_radius = 1.0;
  int horizon = 10;
  double noise_std = 0.1;
  double dynamics_scale = 0.45;   // spectral norm given to theta*
  double param_bound = 1.25;      // W of the model class
  double output_bound = 0.75;     // C
  double box_halfwidth = 1.15;
  Eigen::Vector2d goal{0.25, -0.15};
  double reward_lengthscale = 0.35;
  std::uint64_t seed = 1;
};

/// Environment whose true dynamics lie in the linear class over a frozen
/// random-Fourier map: f*(s, a) = theta*^T psi(s, a). Fixed start at the
/// origin; reward is a Gaussian bump around a goal state.
struct SyntheticLinearEnv {
  EnvSpec spec;
  KnownFeatureMap psi;
  Eigen::MatrixXd theta_star;  // d_psi x d
  double param_bound = 0.0;    // W the class was built with
};

inline double spectral_norm(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

inline SyntheticLinearEnv make_synthetic_linear(const SyntheticLinearParams& p) {
  if (p.state_dim < 1 || p.feature_dim < 1 || p.n_actions < 1)
    throw std::invalid_argument("make_synthetic_linear: invalid dimensions");
  if (!(p.dynamics_scale <= p.param_bound))
    throw std::invalid_argument("make_synthetic_linear: theta* must satisfy the class bound W");

  const int action_dim = 2;
  const RffMap psi_map =
      sample_rff(p.state_dim + action_dim, p.feature_dim, p.feature_bandwidth,
                 derive_seed(p.seed, "synthetic-psi"));
  KnownFeatureMap psi = make_rff_feature_map(psi_map, p.state_dim, action_dim);

  Rng rng(derive_seed(p.seed, "synthetic-theta"));
  Eigen::MatrixXd theta = rng.normal_matrix(p.feature_dim, p.state_dim);
  theta *= p.dynamics_scale / spectral_norm(theta);

  SyntheticLinearEnv env;
  env.psi = psi;
  env.theta_star = theta;
  env.param_bound = p.param_bound;

  EnvSpec& spec = env.spec;
  spec.name = "synthetic-linear";
  spec.state_dim = p.state_dim;
  spec.horizon = p.horizon;
  spec.noise_std = p.noise_std;
  spec.output_bound = p.output_bound;
  spec.state_lo = Eigen::VectorXd::Constant(p.state_dim, -p.box_halfwidth);
  spec.state_hi = Eigen::VectorXd::Constant(p.state_dim, p.box_halfwidth);
  spec.initial_state = Eigen::VectorXd::Zero(p.state_dim);

  // First action is the null action, the rest point outward on a circle.
  spec.actions.push_back(Eigen::VectorXd::Zero(action_dim));
  for (int j = 1; j < p.n_actions; ++j) {
    const double ang = kTwoPi * (j - 1) / (p.n_actions - 1);
    Eigen::VectorXd a(action_dim);
    a << p.action_radius * std::cos(ang), p.action_radius * std::sin(ang);
    spec.actions.push_back(a);
  }

  const Eigen::VectorXd goal = p.goal;
  const double inv_two_ls2 = 1.0 / (2.0 * p.reward_lengthscale * p.reward_lengthscale);
  spec.reward = [goal, inv_two_ls2](const Eigen::VectorXd& s, const Eigen::VectorXd&) {
    return std::exp(-(s - goal).squaredNorm() * inv_two_ls2);
  };
  spec.reward_rows = [goal, inv_two_ls2](const Eigen::MatrixXd& S, const Eigen::VectorXd&) {
    return ((S.rowwise() - goal.transpose()).rowwise().squaredNorm() * -inv_two_ls2)
        .array()
        .exp()
        .matrix()
        .eval();
  };

  const double C = p.output_bound;
  spec.dynamics_mean = [psi, theta, C](const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
    return clip_to_ball(theta.transpose() * psi.eval(s, a), C);
  };
  spec.dynamics_mean_rows = [psi, theta, C](const Eigen::MatrixXd& S, const Eigen::VectorXd& a) {
    Eigen::MatrixXd M = psi.eval_rows(S, a) * theta;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const double n = M.row(i).norm();
      if (n > C) M.row(i) *= C / n;
    }
    return M;
  };
  return env;
}

struct PendulumParams {
  int horizon = 40;
  double noise_std = 0.05;
  double dt = 0.05;
  double gravity = 10.0;
  double length = 1.0;
  double mass = 1.0;
  double max_torque = 2.0;
  int n_torques = 9;
  double max_speed = 8.0;
};

/// Torque-limited swing-up. State is (angle, angular velocity) with the angle
/// measured from the hanging-down position and wrapped to [-pi, pi); reward is
/// (1 - cos(angle)) / 2, i.e. 1 when upright. The downward equilibrium with
/// zero torque is a fixed point of the mean dynamics.
inline EnvSpec make_pendulum(const PendulumParams& p = {}) {
  EnvSpec spec;
  spec.name = "pendulum-swingup";
  spec.state_dim = 2;
  spec.horizon = p.horizon;
  spec.noise_std = p.noise_std;
  spec.output_bound = std::sqrt(kPi * kPi + p.max_speed * p.max_speed);
  spec.state_lo = Eigen::Vector2d(-kPi, -p.max_speed);
  spec.state_hi = Eigen::Vector2d(kPi, p.max_speed);
  spec.initial_state = Eigen::Vector2d::Zero();
  spec.sample_initial = [p](std::uint64_t seed) {
    Rng rng(derive_seed(seed, "pendulum-reset"));
    return Eigen::VectorXd(Eigen::Vector2d(rng.uniform(-kPi, kPi), rng.uniform(-1.0, 1.0)));
  };
  for (int i = 0; i < p.n_torques; ++i) {
    const double u = p.n_torques == 1
                         ? 0.0
                         : -p.max_torque + 2.0 * p.max_torque * i / (p.n_torques - 1);
    spec.actions.push_back(Eigen::VectorXd::Constant(1, u));
  }
  spec.reward = [](const Eigen::VectorXd& s, const Eigen::VectorXd&) {
    return 0.5 * (1.0 - std::cos(s(0)));
  };
  const double grav_coef = 3.0 * p.gravity / (2.0 * p.length);
  const double torque_coef = 3.0 / (p.mass * p.length * p.length);
  const double dt = p.dt;
  const double max_speed = p.max_speed;
  spec.dynamics_mean = [grav_coef, torque_coef, dt, max_speed](const Eigen::VectorXd& s,
                                                               const Eigen::VectorXd& a) {
    const double accel = -grav_coef * std::sin(s(0)) + torque_coef * a(0);
    const double vel = std::clamp(s(1) + dt * accel, -max_speed, max_speed);
    return Eigen::VectorXd(Eigen::Vector2d(wrap_angle(s(0) + dt * vel), vel));
  };
  return spec;
}

struct MountainCarParams {
  int horizon = 60;
  double noise_std = 0.005;
  double force_scale = 0.0015;
  double gravity_scale = 0.0025;
  double max_force = 1.0;
  int n_forces = 5;
};

/// Continuous mountain car with a force grid. Reward is the normalized hill
/// height (1 + sin(3x)) / 2 of the current position.
inline EnvSpec make_mountain_car(const MountainCarParams& p = {}) {
  EnvSpec spec;
  spec.name = "continuous-mountain-car";
  spec.state_dim = 2;
  spec.horizon = p.horizon;
  spec.noise_std = p.noise_std;
  spec.output_bound = std::sqrt(1.2 * 1.2 + 0.07 * 0.07);
  spec.state_lo = Eigen::Vector2d(-1.2, -0.07);
  spec.state_hi = Eigen::Vector2d(0.6, 0.07);
  spec.initial_state = Eigen::Vector2d(-0.5, 0.0);
  spec.sample_initial = [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, "mcar-reset"));
    return Eigen::VectorXd(Eigen::Vector2d(rng.uniform(-0.6, -0.4), 0.0));
  };
  for (int i = 0; i < p.n_forces; ++i) {
    const double u =
        p.n_forces == 1 ? 0.0 : -p.max_force + 2.0 * p.max_force * i / (p.n_forces - 1);
    spec.actions.push_back(Eigen::VectorXd::Constant(1, u));
  }
  spec.reward = [](const Eigen::VectorXd& s, const Eigen::VectorXd&) {
    return 0.5 * (1.0 + std::sin(3.0 * s(0)));
  };
  const double fs = p.force_scale, gs = p.gravity_scale;
  spec.dynamics_mean = [fs, gs](const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
    const double v = std::clamp(s(1) + fs * a(0) - gs * std::cos(3.0 * s(0)), -0.07, 0.07);
    const double x = std::clamp(s(0) + v, -1.2, 0.6);
    return Eigen::VectorXd(Eigen::Vector2d(x, v));
  };
  return spec;
}

inline EnvSpec with_loop_batches(EnvSpec spec) {
  if (!spec.dynamics_mean_rows) {
    const auto mean = spec.dynamics_mean;
    const int d = spec.state_dim;
    spec.dynamics_mean_rows = [mean, d](const Eigen::MatrixXd& S, const Eigen::VectorXd& a) {
      Eigen::MatrixXd M(S.rows(), d);
      for (Eigen::Index i = 0; i < S.rows(); ++i)
        M.row(i) = mean(S.row(i).transpose(), a).transpose();
      return M;
    };
  }
  if (!spec.reward_rows) {
    const auto rew = spec.reward;
    spec.reward_rows = [rew](const Eigen::MatrixXd& S, const Eigen::VectorXd& a) {
      Eigen::VectorXd r(S.rows());
      for (Eigen::Index i = 0; i < S.rows(); ++i) r(i) = rew(S.row(i).transpose(), a);
      return r;
    };
  }
  return spec;
}

// Largest singular value by power iteration on m^T m (the smaller Gram side).
inline double spectral_norm(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0.0;
  const bool tall = m.rows() >= m.cols();
  const Eigen::MatrixXd gram = tall ? Eigen::MatrixXd(m.transpose() * m)
                                    : Eigen::MatrixXd(m * m.transpose());
  const Eigen::Index n = gram.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = gram * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    w /= next;
    if (std::abs(next - lambda) <= rel_tol * std::max(next, 1e-300)) {
      lambda = next;
      break;
    }
    lambda = next;
    v = w;
  }
  return std::sqrt(lambda);
}

}  // namespace rffrl
