#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rffrl/environment.hpp"
#include "rffrl/feature_map.hpp"
#include "rffrl/io.hpp"

namespace rffrl {

/// Append-only log of executed episodes; the index set E_K of the analysis.
struct History {
  std::vector<Trajectory> episodes;

  int total_transitions() const {
    int n = 0;
    for (const auto& e : episodes) n += static_cast<int>(e.steps.size());
    return n;
  }

  bool empty() const { return total_transitions() == 0; }

  void append(Trajectory t) { episodes.push_back(std::move(t)); }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& e : episodes)
      for (const auto& t : e.steps) fn(t);
  }
};

/// Model class F = { (s,a) -> theta^T psi(s,a) : |theta|_2 <= param_bound },
/// with predictions clipped to the output ball of radius output_clip.
struct ModelClass {
  KnownFeatureMap fm;
  double param_bound = 0.0;  // W
  double output_clip = 0.0;  // C
};

struct LinearDynamicsModel {
  Eigen::MatrixXd theta;  // d_psi x d
  KnownFeatureMap fm;
  double param_bound = 0.0;
  double output_clip = 0.0;

  Eigen::VectorXd predict(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    if (s.size() != fm.state_dim || a.size() != fm.action_dim)
      throw std::invalid_argument("predict: state/action dimension mismatch");
    return clip_to_ball(theta.transpose() * fm.eval(s, a), output_clip);
  }

  Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& S, const Eigen::VectorXd& a) const {
    Eigen::MatrixXd M = fm.eval_rows(S, a) * theta;
    const double C = output_clip;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const double n = M.row(i).norm();
      if (n > C) M.row(i) *= C / n;
    }
    return M;
  }
};

inline void project_to_param_bound(Eigen::MatrixXd& theta, double bound) {
  const double n = spectral_norm(theta);
  if (n > bound) theta *= bound / n;
}

namespace detail {

struct FlatHistory {
  Eigen::MatrixXd states;   // n x d
  Eigen::MatrixXd next;     // n x d
  std::vector<int> action_idx;  // per row, index into the actions seen
  std::vector<Eigen::VectorXd> actions;  // distinct actions by first appearance
};

inline FlatHistory flatten(const History& history) {
  FlatHistory flat;
  const int n = history.total_transitions();
  if (n == 0) return flat;
  const int d = static_cast<int>(history.episodes.front().steps.front().state.size());
  flat.states.resize(n, d);
  flat.next.resize(n, d);
  flat.action_idx.reserve(n);
  int row = 0;
  history.for_each([&](const Transition& t) {
    flat.states.row(row) = t.state.transpose();
    flat.next.row(row) = t.next_state.transpose();
    int idx = -1;
    for (std::size_t i = 0; i < flat.actions.size(); ++i)
      if ((flat.actions[i] - t.action).lpNorm<Eigen::Infinity>() == 0.0) {
        idx = static_cast<int>(i);
        break;
      }
    if (idx < 0) {
      idx = static_cast<int>(flat.actions.size());
      flat.actions.push_back(t.action);
    }
    flat.action_idx.push_back(idx);
    ++row;
  });
  return flat;
}

// Feature matrix over all logged transitions, grouped by action so the
// batched psi path does the work.
inline Eigen::MatrixXd feature_rows(const FlatHistory& flat, const KnownFeatureMap& fm) {
  const int n = static_cast<int>(flat.action_idx.size());
  Eigen::MatrixXd Psi(n, fm.dim);
  for (std::size_t ai = 0; ai < flat.actions.size(); ++ai) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
      if (flat.action_idx[i] == static_cast<int>(ai)) rows.push_back(i);
    if (rows.empty()) continue;
    Eigen::MatrixXd S(rows.size(), flat.states.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) S.row(r) = flat.states.row(rows[r]);
    const Eigen::MatrixXd block = fm.eval_rows(S, flat.actions[ai]);
    for (std::size_t r = 0; r < rows.size(); ++r) Psi.row(rows[r]) = block.row(r);
  }
  return Psi;
}

}  // namespace detail

/// Ridge least squares over all logged transitions:
///   theta = argmin sum_i |theta^T psi_i - s'_i|^2 + ridge |theta|_F^2,
/// then projected to the spectral-norm ball of the class.
inline LinearDynamicsModel fit_least_squares(const History& history, const ModelClass& cls,
                                             double ridge) {
  if (history.empty()) throw std::invalid_argument("fit_least_squares: empty history");
  if (ridge < 0.0) throw std::invalid_argument("fit_least_squares: ridge must be >= 0");

  const detail::FlatHistory flat = detail::flatten(history);
  const Eigen::MatrixXd Psi = detail::feature_rows(flat, cls.fm);
  Eigen::MatrixXd gram = Psi.transpose() * Psi;
  if (ridge == 0.0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    if (qr.rank() < gram.rows())
      throw std::runtime_error(
          "fit_least_squares: singular normal equations; use ridge > 0 or more data");
  }
  gram.diagonal().array() += ridge;
  Eigen::MatrixXd theta = gram.ldlt().solve(Psi.transpose() * flat.next);
  project_to_param_bound(theta, cls.param_bound);

  LinearDynamicsModel model;
  model.theta = std::move(theta);
  model.fm = cls.fm;
  model.param_bound = cls.param_bound;
  model.output_clip = cls.output_clip;
  return model;
}

/// Empirical 2-norm of the prediction difference over the logged history:
///   sqrt( sum_{k,h} |f_a(s,a) - f_b(s,a)|_2^2 ).
inline double empirical_two_norm(const LinearDynamicsModel& a, const LinearDynamicsModel& b,
                                 const History& history) {
  if (a.fm.dim != b.fm.dim)
    throw std::invalid_argument("empirical_two_norm: models use different feature maps");
  if (history.empty()) return 0.0;
  const detail::FlatHistory flat = detail::flatten(history);
  double acc = 0.0;
  for (std::size_t ai = 0; ai < flat.actions.size(); ++ai) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < flat.action_idx.size(); ++i)
      if (flat.action_idx[i] == static_cast<int>(ai)) rows.push_back(static_cast<int>(i));
    Eigen::MatrixXd S(rows.size(), flat.states.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) S.row(r) = flat.states.row(rows[r]);
    const Eigen::MatrixXd da =
        a.predict_rows(S, flat.actions[ai]) - b.predict_rows(S, flat.actions[ai]);
    acc += da.squaredNorm();
  }
  return std::sqrt(acc);
}

/// Confidence radius
///   beta*_K = 8 sigma^2 log(N(F, alpha, |.|_2) / delta)
///           + 2 H alpha (12 C + sqrt(8 d sigma^2 log(4 K^2 H / delta))).
/// covering_log supplies log N(F, alpha, |.|_2).
inline double beta_radius(double covering_log, double delta, double alpha, int K, int H,
                          double sigma, double C, int d) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("beta_radius: delta must lie in (0,1)");
  if (alpha < 0.0 || sigma < 0.0 || K < 1 || H < 1 || C < 0.0 || d < 1)
    throw std::invalid_argument("beta_radius: invalid parameter");
  const double log_term = covering_log + std::log(1.0 / delta);
  const double tail = std::sqrt(8.0 * d * sigma * sigma *
                                std::log(4.0 * double(K) * double(K) * double(H) / delta));
  return 8.0 * sigma * sigma * log_term + 2.0 * H * alpha * (12.0 * C + tail);
}

/// F_K = { f : |f - center|_{2,E_K}^2 <= radius }; radius stores beta*_K.
struct ConfidenceSet {
  LinearDynamicsModel center;
  double radius = 0.0;
  int history_len = 0;
};

inline bool in_confidence_set(const LinearDynamicsModel& candidate, const ConfidenceSet& set,
                              const History& history) {
  const double n = empirical_two_norm(candidate, set.center, history);
  return n * n <= set.radius;
}

struct PosteriorConfig {
  double ridge = 1e-6;
  double noise_scale = 0.0;  // std of the target perturbation (sigma for exact Bayes)
  double prior_scale = 0.0;  // entrywise std of the anchor draw theta_prior
};

/// Approximate posterior draw by randomized (perturbed) least squares:
/// draw theta_prior ~ N(0, prior_scale^2) entrywise, perturb every regression
/// target by N(0, noise_scale^2 I), and solve the ridge problem anchored at
/// theta_prior. With ridge = noise_scale^2 / prior_scale^2 this is an exact
/// posterior sample for Bayesian linear regression. noise_scale == 0 removes
/// both the perturbation and the anchor, so the draw degenerates to the plain
/// least-squares fit (or the zero model on an empty history).
inline LinearDynamicsModel posterior_sample(const History& history, const ModelClass& cls,
                                            const PosteriorConfig& cfg, std::uint64_t seed) {
  LinearDynamicsModel model;
  model.fm = cls.fm;
  model.param_bound = cls.param_bound;
  model.output_clip = cls.output_clip;

  const int d_psi = cls.fm.dim;
  const int d = cls.fm.state_dim;

  if (cfg.noise_scale == 0.0) {
    if (history.empty()) {
      model.theta = Eigen::MatrixXd::Zero(d_psi, d);
      return model;
    }
    return fit_least_squares(history, cls, cfg.ridge);
  }

  Rng rng(derive_seed(seed, "posterior-sample"));
  Eigen::MatrixXd theta_prior = cfg.prior_scale * rng.normal_matrix(d_psi, d);

  if (history.empty()) {
    project_to_param_bound(theta_prior, cls.param_bound);
    model.theta = std::move(theta_prior);
    return model;
  }

  const detail::FlatHistory flat = detail::flatten(history);
  const Eigen::MatrixXd Psi = detail::feature_rows(flat, cls.fm);
  const Eigen::MatrixXd targets =
      flat.next + cfg.noise_scale * rng.normal_matrix(flat.next.rows(), d);
  Eigen::MatrixXd gram = Psi.transpose() * Psi;
  gram.diagonal().array() += cfg.ridge;
  Eigen::MatrixXd theta =
      gram.ldlt().solve(Psi.transpose() * targets + cfg.ridge * theta_prior);
  project_to_param_bound(theta, cls.param_bound);
  model.theta = std::move(theta);
  return model;
}

/// Width of the confidence ellipsoid at a query point:
///   sqrt(2 beta) * sqrt(psi^T V_K^{-1} psi),  V_K = sum psi psi^T + ridge I.
inline double model_width(const KnownFeatureMap& fm, const History& history, double beta,
                          const Eigen::VectorXd& query_state,
                          const Eigen::VectorXd& query_action, double ridge) {
  if (beta < 0.0) throw std::invalid_argument("model_width: beta must be >= 0");
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(fm.dim, fm.dim);
  if (!history.empty()) {
    const detail::FlatHistory flat = detail::flatten(history);
    const Eigen::MatrixXd Psi = detail::feature_rows(flat, fm);
    V = Psi.transpose() * Psi;
  }
  if (ridge == 0.0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < V.rows())
      throw std::runtime_error("model_width: singular design matrix; use ridge > 0");
  }
  V.diagonal().array() += ridge;
  const Eigen::VectorXd psi = fm.eval(query_state, query_action);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
  const double quad = psi.dot(ldlt.solve(psi));
  return std::sqrt(2.0 * beta * std::max(quad, 0.0));
}

// --- checkpointing -----------------------------------------------------------

/// Persist (theta, bounds). The feature map itself is reconstructed by the
/// caller from its own record (for RFF maps, the seed), so the checkpoint
/// stores only the map dimensions for validation.
inline void save_model(const LinearDynamicsModel& model, std::ostream& os) {
  os << "lineardynamicsmodel 1\n"
     << "rows " << model.theta.rows() << "\n"
     << "cols " << model.theta.cols() << "\n"
     << "param_bound " << double_repr(model.param_bound) << "\n"
     << "output_clip " << double_repr(model.output_clip) << "\n";
  for (Eigen::Index i = 0; i < model.theta.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.theta.cols(); ++j) {
      if (j > 0) os << ' ';
      os << double_repr(model.theta(i, j));
    }
    os << '\n';
  }
}

inline LinearDynamicsModel load_model(std::istream& is, const KnownFeatureMap& fm) {
  std::string word;
  int version = 0;
  is >> word >> version;
  if (word != "lineardynamicsmodel" || version != 1)
    throw std::runtime_error("load_model: unrecognized record header");
  Eigen::Index rows = 0, cols = 0;
  LinearDynamicsModel model;
  is >> word >> rows >> word >> cols >> word >> model.param_bound >> word >> model.output_clip;
  if (rows != fm.dim) throw std::runtime_error("load_model: feature map dimension mismatch");
  model.theta.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) is >> model.theta(i, j);
  if (!is) throw std::runtime_error("load_model: truncated record");
  model.fm = fm;
  return model;
}

}  // namespace rffrl
