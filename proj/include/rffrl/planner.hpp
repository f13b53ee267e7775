#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rffrl/random_fourier.hpp"
#include "rffrl/rng.hpp"

namespace rffrl {

using ActionGrid = std::vector<Eigen::VectorXd>;

/// Mean next state of the planning model for a batch of states (rows) and one
/// shared action. Output rows are already clipped to the model's output ball.
using BatchDynamicsFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;
using BatchRewardFn =
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;
/// Value function evaluated at a batch of states (rows).
using BatchValueFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct PlannerConfig {
  int n_anchors = 2048;     // uniform anchor draws from the state box
  int n_mesh_states = 64;   // extra anchors: model means from a coarse mesh
  int n_mc = 16;            // noise draws per anchor for the value targets
  double ridge_scale = 1e-6;  // regression ridge = ridge_scale * n_anchor_rows
  bool clip_values = true;  // clip evaluated V_h into [0, H-h]
  double noise_std = 0.1;   // sigma used in planning (the environment's true sigma)
  Eigen::VectorXd state_lo, state_hi;  // anchor box
  int eval_chunk = 8192;    // rows per batched value evaluation
};

/// phi with a constant intercept feature 1/sqrt(D) appended; RFF features have
/// nonzero mean and value functions carry offsets the cosines cannot absorb.
inline Eigen::MatrixXd rff_with_intercept(const RffMap& map, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd phi(X.rows(), map.n_features() + 1);
  phi.leftCols(map.n_features()) = apply_rff_rows(map, X);
  phi.col(map.n_features()).setConstant(1.0 / std::sqrt(double(map.n_features())));
  return phi;
}

/// Ridge regression of noisy-value targets onto intercept-augmented RFF
/// features, with the normal-equation factorization cached so backward
/// induction can refit per step against the same anchors.
class ValueRegression {
 public:
  ValueRegression(RffMap rff, Eigen::MatrixXd anchors, double ridge)
      : rff_(std::move(rff)), anchors_(std::move(anchors)), ridge_(ridge) {
    if (anchors_.rows() < 1)
      throw std::invalid_argument("ValueRegression: need at least one anchor");
    phi_ = rff_with_intercept(rff_, anchors_);
    const Eigen::Index n = phi_.rows(), d = phi_.cols();
    primal_ = n >= d;
    Eigen::MatrixXd gram = primal_ ? Eigen::MatrixXd(phi_.transpose() * phi_)
                                   : Eigen::MatrixXd(phi_ * phi_.transpose());
    gram.diagonal().array() += ridge_;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("ValueRegression: factorization failed");
  }

  const Eigen::MatrixXd& anchors() const { return anchors_; }
  double ridge() const { return ridge_; }

  /// Targets y_j = (1/n_mc) sum_m v_next(x_j + eps_m), eps_m ~ N(0, sigma^2 I);
  /// returns w with phi(x).w ~= E_{s' ~ N(x, sigma^2 I)}[ v_next(s') ].
  Eigen::VectorXd fit(const BatchValueFn& v_next, double sigma, int n_mc,
                      std::uint64_t seed, int eval_chunk = 8192) const {
    if (n_mc < 1) throw std::invalid_argument("ValueRegression: n_mc must be >= 1");
    const Eigen::Index n = anchors_.rows();
    const Eigen::Index d = anchors_.cols();
    Rng rng(derive_seed(seed, "value-targets"));
    Eigen::VectorXd y(n);
    const Eigen::Index block = std::max<Eigen::Index>(1, eval_chunk / n_mc);
    for (Eigen::Index start = 0; start < n; start += block) {
      const Eigen::Index m = std::min(block, n - start);
      Eigen::MatrixXd Z(m * n_mc, d);
      for (Eigen::Index j = 0; j < m; ++j)
        for (int rep = 0; rep < n_mc; ++rep)
          Z.row(j * n_mc + rep) =
              anchors_.row(start + j) + sigma * rng.normal_vector(int(d)).transpose();
      const Eigen::VectorXd v = v_next(Z);
      for (Eigen::Index j = 0; j < m; ++j)
        y(start + j) = v.segment(j * n_mc, n_mc).mean();
    }
    return solve(y);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const {
    if (primal_) return llt_.solve(phi_.transpose() * y);
    return phi_.transpose() * llt_.solve(y);
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) const {
    return rff_with_intercept(rff_, X) * w;
  }

 private:
  RffMap rff_;
  Eigen::MatrixXd anchors_;
  double ridge_;
  Eigen::MatrixXd phi_;
  bool primal_ = true;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline Eigen::VectorXd regress_value_weights(const RffMap& rff, const Eigen::MatrixXd& anchors,
                                             const BatchValueFn& v_next, double sigma,
                                             int n_mc, double ridge, std::uint64_t seed) {
  return ValueRegression(rff, anchors, ridge).fit(v_next, sigma, n_mc, seed);
}

/// Greedy finite-horizon policy induced by per-step value weights over the
/// spectral features of a dynamics model:
///   Q_h(s, a) = r(s, a) + phi(f(s, a)) . w_h,
/// where phi is the intercept-augmented RFF map and w_h encodes the expected
/// next-step value. V_H = 0; ties break toward the lowest grid index.
struct Policy {
  Eigen::MatrixXd weights;  // horizon x (D+1); row h is w_h
  RffMap rff;
  BatchDynamicsFn model;
  BatchRewardFn reward;
  ActionGrid grid;
  int horizon = 0;
  bool clip_values = true;
};

inline Eigen::VectorXd policy_q_rows(const Policy& pol, const Eigen::MatrixXd& S, int h,
                                     int action_idx) {
  const Eigen::MatrixXd means = pol.model(S, pol.grid[action_idx]);
  return pol.reward(S, pol.grid[action_idx]) +
         rff_with_intercept(pol.rff, means) * pol.weights.row(h).transpose();
}

inline Eigen::MatrixXd policy_q_all(const Policy& pol, const Eigen::MatrixXd& S, int h) {
  Eigen::MatrixXd q(S.rows(), pol.grid.size());
  for (std::size_t a = 0; a < pol.grid.size(); ++a)
    q.col(a) = policy_q_rows(pol, S, h, static_cast<int>(a));
  return q;
}

/// V_h(S) = max_a Q_h(S, a), clipped into [0, H-h] when enabled.
inline Eigen::VectorXd policy_value_rows(const Policy& pol, const Eigen::MatrixXd& S, int h) {
  Eigen::VectorXd v = policy_q_all(pol, S, h).rowwise().maxCoeff();
  if (pol.clip_values) {
    const double hi = double(pol.horizon - h);
    v = v.cwiseMax(0.0).cwiseMin(hi);
  }
  return v;
}

inline Eigen::VectorXi policy_greedy_rows(const Policy& pol, const Eigen::MatrixXd& S, int h) {
  if (h < 0 || h >= pol.horizon) throw std::invalid_argument("policy_greedy_rows: invalid step");
  const Eigen::MatrixXd q = policy_q_all(pol, S, h);
  Eigen::VectorXi idx(S.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(i, a) > q(i, best)) best = static_cast<int>(a);  // strict: ties keep lowest index
    idx(i) = best;
  }
  return idx;
}

inline Eigen::VectorXd greedy_action(const Policy& pol, const Eigen::VectorXd& state, int h) {
  const Eigen::VectorXi idx = policy_greedy_rows(pol, state.transpose(), h);
  return pol.grid[idx(0)];
}

/// Backward dynamic programming over spectral features (finite horizon).
/// For h = H-1 .. 0 the weight row w_h is the value-regression solution whose
/// prediction at f(s, a) approximates E[V_{h+1}(s')]; the expectation over the
/// Gaussian transition noise is absorbed into the regression targets.
inline Policy plan_dp(const BatchDynamicsFn& model, const RffMap& rff,
                      const BatchRewardFn& reward, int horizon, const ActionGrid& grid,
                      const PlannerConfig& config, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("plan_dp: empty action grid");
  if (horizon < 1) throw std::invalid_argument("plan_dp: horizon must be >= 1");
  const int d = rff.input_dim();
  if (config.state_lo.size() != d || config.state_hi.size() != d)
    throw std::invalid_argument("plan_dp: anchor box does not match the state dimension");

  // Anchor set: uniform draws over the state box plus the model means
  // reachable from a coarse state mesh, so the regression sees the region
  // where phi(f(s, a)) is queried.
  Rng rng(derive_seed(seed, "plan-anchors"));
  auto uniform_states = [&](int n) {
    Eigen::MatrixXd S(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) S(i, j) = rng.uniform(config.state_lo(j), config.state_hi(j));
    return S;
  };
  const Eigen::MatrixXd uniform = uniform_states(std::max(1, config.n_anchors));
  Eigen::MatrixXd anchors;
  if (config.n_mesh_states > 0) {
    const Eigen::MatrixXd mesh = uniform_states(config.n_mesh_states);
    anchors.resize(uniform.rows() + mesh.rows() * Eigen::Index(grid.size()), d);
    anchors.topRows(uniform.rows()) = uniform;
    Eigen::Index row = uniform.rows();
    for (const auto& action : grid) {
      anchors.middleRows(row, mesh.rows()) = model(mesh, action);
      row += mesh.rows();
    }
  } else {
    anchors = uniform;
  }

  const double ridge = config.ridge_scale * double(anchors.rows());
  const ValueRegression regression(rff, std::move(anchors), ridge);
  const Eigen::Index n_anchor = regression.anchors().rows();

  Policy pol;
  pol.rff = rff;
  pol.model = model;
  pol.reward = reward;
  pol.grid = grid;
  pol.horizon = horizon;
  pol.clip_values = config.clip_values;
  pol.weights = Eigen::MatrixXd::Zero(horizon, rff.n_features() + 1);  // w_{H-1} = 0
  if (horizon == 1) return pol;

  // The target evaluation points Z (anchors plus Gaussian perturbations) do
  // not depend on h, so they are drawn once per plan and their per-action
  // rewards and feature rows are cached; each backward step then reduces to
  // matrix-vector products. Fixed evaluation points across steps act like a
  // shared quadrature rule for the noise expectation.
  Rng noise_rng(derive_seed(seed, "plan-noise"));
  Eigen::MatrixXd Z(n_anchor * config.n_mc, d);
  for (Eigen::Index j = 0; j < n_anchor; ++j)
    for (int rep = 0; rep < config.n_mc; ++rep)
      Z.row(j * config.n_mc + rep) =
          regression.anchors().row(j) +
          config.noise_std * noise_rng.normal_vector(d).transpose();

  const Eigen::Index n_z = Z.rows();
  const std::size_t n_actions = grid.size();
  const Eigen::Index feat_cols = rff.n_features() + 1;
  // Cache phi(model(Z, a)) when it fits in a fixed budget; otherwise keep only
  // the model means and rebuild features chunkwise per step.
  const bool cache_features =
      double(n_z) * double(feat_cols) * double(n_actions) * 8.0 < 768.0 * 1024 * 1024;

  std::vector<Eigen::VectorXd> reward_cols(n_actions);
  std::vector<Eigen::MatrixXd> mean_rows(n_actions);
  std::vector<Eigen::MatrixXd> feat_rows(cache_features ? n_actions : 0);
  for (std::size_t a = 0; a < n_actions; ++a) {
    reward_cols[a] = reward(Z, grid[a]);
    mean_rows[a] = model(Z, grid[a]);
    if (cache_features) feat_rows[a] = rff_with_intercept(rff, mean_rows[a]);
  }

  Eigen::VectorXd y(n_anchor);
  for (int h = horizon - 2; h >= 0; --h) {
    const Eigen::VectorXd w_next = pol.weights.row(h + 1).transpose();
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n_z, -std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (cache_features) {
        v = v.cwiseMax(reward_cols[a] + feat_rows[a] * w_next);
      } else {
        for (Eigen::Index start = 0; start < n_z; start += config.eval_chunk) {
          const Eigen::Index m = std::min<Eigen::Index>(config.eval_chunk, n_z - start);
          v.segment(start, m) = v.segment(start, m).cwiseMax(
              reward_cols[a].segment(start, m) +
              rff_with_intercept(rff, mean_rows[a].middleRows(start, m)) * w_next);
        }
      }
    }
    if (config.clip_values)
      v = v.cwiseMax(0.0).cwiseMin(double(horizon - h - 1));
    for (Eigen::Index j = 0; j < n_anchor; ++j)
      y(j) = v.segment(j * config.n_mc, config.n_mc).mean();
    pol.weights.row(h) = regression.solve(y).transpose();
  }
  return pol;
}

}  // namespace rffrl
