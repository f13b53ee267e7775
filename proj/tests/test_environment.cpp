#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rffrl/environment.hpp"

using namespace rffrl;

TEST_SUITE_BEGIN("environment");

TEST_CASE("synthetic-linear resets to the origin") {
  const auto env = make_synthetic_linear({});
  CHECK(env_reset(env.spec, 3).isZero());
  CHECK(env_reset(env.spec, 99).isZero());
}

TEST_CASE("pendulum reset is deterministic per seed and varies across seeds") {
  const EnvSpec spec = make_pendulum();
  int distinct = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Eigen::VectorXd a = env_reset(spec, s);
    const Eigen::VectorXd b = env_reset(spec, s);
    CHECK(a == b);
    if ((env_reset(spec, s) - env_reset(spec, s + 1000)).norm() > 0.0) ++distinct;
  }
  CHECK(distinct == 100);
}

TEST_CASE("noise-free synthetic step equals theta*^T psi") {
  SyntheticLinearParams p;
  p.noise_std = 1e-12;
  const auto env = make_synthetic_linear(p);
  Eigen::VectorXd s(2);
  s << 0.2, -0.4;
  const Eigen::VectorXd a = env.spec.actions[2];
  const Transition t = env_step(env.spec, s, a, 5);
  const Eigen::VectorXd expected = env.theta_star.transpose() * env.psi(s, a);
  CHECK((t.next_state - expected).norm() <= 1e-6);
}

TEST_CASE("step noise has the configured standard deviation") {
  SyntheticLinearParams p;
  p.noise_std = 0.1;
  const auto env = make_synthetic_linear(p);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd a = env.spec.actions[1];
  const Eigen::VectorXd mean = true_dynamics_eval(env.spec, s, a);
  const int n = 10000;
  Eigen::MatrixXd residual(n, 2);
  for (int i = 0; i < n; ++i)
    residual.row(i) = (env_step(env.spec, s, a, 1000 + i).next_state - mean).transpose();
  for (int j = 0; j < 2; ++j) {
    const double sd = std::sqrt(residual.col(j).squaredNorm() / (n - 1));
    CHECK(sd == doctest::Approx(0.1).epsilon(0.03));
  }
}

TEST_CASE("noise isotropy: empirical covariance close to sigma^2 I") {
  SyntheticLinearParams p;
  p.noise_std = 0.1;
  const auto env = make_synthetic_linear(p);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd a = env.spec.actions[3];
  const Eigen::VectorXd mean = true_dynamics_eval(env.spec, s, a);
  const int n = 10000;
  Eigen::MatrixXd residual(n, 2);
  for (int i = 0; i < n; ++i)
    residual.row(i) = (env_step(env.spec, s, a, 77000 + i).next_state - mean).transpose();
  const Eigen::MatrixXd cov = residual.transpose() * residual / double(n - 1);
  const Eigen::MatrixXd target = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  CHECK((cov - target).norm() <= 0.05 * target.norm());
}

TEST_CASE("out-of-grid actions are rejected") {
  const auto env = make_synthetic_linear({});
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd bad(2);
  bad << 0.123, 0.456;
  CHECK_THROWS_AS(env_step(env.spec, s, bad, 0), std::invalid_argument);
  CHECK_THROWS_AS(env_step(env.spec, s, Eigen::VectorXd::Zero(1), 0), std::invalid_argument);
}

TEST_CASE("true_dynamics_eval matches the synthetic construction exactly") {
  const auto env = make_synthetic_linear({});
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd s = rng.uniform_vector(2, -1.0, 1.0);
    const Eigen::VectorXd a = env.spec.actions[rng.uniform_index(5)];
    const Eigen::VectorXd expected =
        clip_to_ball(env.theta_star.transpose() * env.psi(s, a), env.spec.output_bound);
    CHECK((true_dynamics_eval(env.spec, s, a) - expected).norm() == 0.0);
  }
}

TEST_CASE("pendulum downward equilibrium is a fixed point under zero torque") {
  const EnvSpec spec = make_pendulum();
  const Eigen::VectorXd rest = Eigen::Vector2d::Zero();
  const Eigen::VectorXd zero_torque = Eigen::VectorXd::Zero(1);
  CHECK(spec.action_index(zero_torque) >= 0);
  CHECK(true_dynamics_eval(spec, rest, zero_torque).norm() == doctest::Approx(0.0));
}

TEST_CASE("bounded output holds on a state-action sweep") {
  const auto syn = make_synthetic_linear({});
  const EnvSpec pend = make_pendulum();
  const EnvSpec mcar = make_mountain_car();
  for (const EnvSpec* spec : {&syn.spec, &pend, &mcar}) {
    Rng rng(13);
    for (int i = 0; i < 400; ++i) {
      Eigen::VectorXd s(spec->state_dim);
      for (int j = 0; j < spec->state_dim; ++j)
        s(j) = rng.uniform(spec->state_lo(j), spec->state_hi(j));
      const Eigen::VectorXd& a = spec->actions[rng.uniform_index((int)spec->actions.size())];
      CHECK(true_dynamics_eval(*spec, s, a).norm() <= spec->output_bound + 1e-9);
    }
  }
}

TEST_CASE("rollout rewards lie in [0,1] and returns in [0,H]") {
  for (const EnvSpec& spec :
       {make_synthetic_linear({}).spec, make_pendulum(), make_mountain_car()}) {
    Rng policy_rng(21);
    Eigen::VectorXd s = env_reset(spec, 17);
    Trajectory traj;
    for (int h = 0; h < spec.horizon; ++h) {
      const Eigen::VectorXd& a = spec.actions[policy_rng.uniform_index((int)spec.actions.size())];
      Transition t = env_step(spec, s, a, derive_seed(99, spec.name, h), h);
      CHECK(t.reward >= 0.0);
      CHECK(t.reward <= 1.0);
      s = t.next_state;
      traj.steps.push_back(std::move(t));
    }
    // consecutive states chain
    for (int h = 1; h < spec.horizon; ++h)
      CHECK(traj.steps[h].state == traj.steps[h - 1].next_state);
    const double ret = traj.total_reward();
    CHECK(ret >= 0.0);
    CHECK(ret <= spec.horizon);
  }
}

TEST_CASE("batched dynamics and reward hooks agree with scalar paths") {
  const auto env = make_synthetic_linear({});
  const EnvSpec spec = with_loop_batches(make_pendulum());
  Rng rng(31);
  for (const EnvSpec* s_ptr : {&env.spec, &spec}) {
    const EnvSpec& sp = *s_ptr;
    Eigen::MatrixXd S(6, sp.state_dim);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < sp.state_dim; ++j) S(i, j) = rng.uniform(sp.state_lo(j), sp.state_hi(j));
    const Eigen::VectorXd& a = sp.actions[1];
    const Eigen::MatrixXd M = sp.dynamics_mean_rows(S, a);
    const Eigen::VectorXd r = sp.reward_rows(S, a);
    for (int i = 0; i < 6; ++i) {
      CHECK((M.row(i).transpose() - sp.dynamics_mean(S.row(i).transpose(), a)).norm() <= 1e-12);
      CHECK(r(i) == doctest::Approx(sp.reward(S.row(i).transpose(), a)));
    }
  }
}

TEST_CASE("spectral norm matches Eigen SVD on random matrices") {
  Rng rng(71);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd m = rng.normal_matrix(8, 3);
    const double svd = m.jacobiSvd().singularValues()(0);
    CHECK(spectral_norm(m) == doctest::Approx(svd).epsilon(1e-6));
  }
  CHECK(spectral_norm(Eigen::MatrixXd::Zero(4, 2)) == 0.0);
}

TEST_SUITE_END();
