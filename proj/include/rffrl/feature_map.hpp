#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include "rffrl/random_fourier.hpp"

namespace rffrl {

/// Known feature map psi(s, a) for the linear model class
/// { (s, a) -> theta^T psi(s, a) : |theta|_2 <= W }, with |psi|_2 <= bound
/// everywhere. Batched evaluation takes states as rows with one shared action.
struct KnownFeatureMap {
  int state_dim = 0;
  int action_dim = 0;
  int dim = 0;
  double bound = 0.0;  // B
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)> eval_rows;

  Eigen::VectorXd operator()(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    return eval(s, a);
  }
};

/// Random-Fourier feature map on the concatenated (s, a) vector.
/// |psi|_2 <= sqrt(2) exactly, independent of the input.
inline KnownFeatureMap make_rff_feature_map(const RffMap& map, int state_dim,
                                            int action_dim) {
  if (map.input_dim() != state_dim + action_dim)
    throw std::invalid_argument("make_rff_feature_map: map input_dim must equal state_dim + action_dim");
  KnownFeatureMap fm;
  fm.state_dim = state_dim;
  fm.action_dim = action_dim;
  fm.dim = map.n_features();
  fm.bound = std::sqrt(2.0);
  fm.eval = [map, state_dim, action_dim](const Eigen::VectorXd& s,
                                         const Eigen::VectorXd& a) {
    Eigen::VectorXd x(state_dim + action_dim);
    x.head(state_dim) = s;
    x.tail(action_dim) = a;
    return apply_rff(map, x);
  };
  fm.eval_rows = [map, state_dim, action_dim](const Eigen::MatrixXd& S,
                                              const Eigen::VectorXd& a) {
    Eigen::MatrixXd X(S.rows(), state_dim + action_dim);
    X.leftCols(state_dim) = S;
    X.rightCols(action_dim).rowwise() = a.transpose();
    return apply_rff_rows(map, X);
  };
  return fm;
}

}  // namespace rffrl
