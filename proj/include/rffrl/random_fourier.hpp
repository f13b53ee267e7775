#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rffrl/io.hpp"
#include "rffrl/rng.hpp"

namespace rffrl {

/// Frozen random Fourier feature map for the Gaussian kernel
/// k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
///
/// Row i holds a frequency omega_i drawn from N(0, sigma^-2 I); phases are
/// uniform on [0, 2pi). Features are normalized by sqrt(2/D) so that the
/// plain Euclidean dot product of two feature vectors is a Monte Carlo
/// estimate of the kernel. The map is immutable after sampling.
struct RffMap {
  Eigen::MatrixXd frequencies;  // D x d
  Eigen::VectorXd phases;       // D, entries in [0, 2pi)
  double bandwidth = 1.0;
  std::uint64_t seed = 0;

  int n_features() const { return static_cast<int>(frequencies.rows()); }
  int input_dim() const { return static_cast<int>(frequencies.cols()); }
  double scale() const { return std::sqrt(2.0 / n_features()); }
};

inline RffMap sample_rff(int input_dim, int n_features, double bandwidth,
                         std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("sample_rff: input_dim must be >= 1");
  if (n_features < 1) throw std::invalid_argument("sample_rff: n_features must be >= 1");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("sample_rff: bandwidth must be > 0");

  Rng rng(derive_seed(seed, "rff-map"));
  RffMap map;
  map.bandwidth = bandwidth;
  map.seed = seed;
  map.frequencies = rng.normal_matrix(n_features, input_dim) / bandwidth;
  map.phases.resize(n_features);
  for (int i = 0; i < n_features; ++i) map.phases(i) = kTwoPi * rng.uniform();
  return map;
}

inline void check_rff_input(const RffMap& map, Eigen::Index dim) {
  if (dim != map.input_dim())
    throw std::invalid_argument("apply_rff: input dimension " + std::to_string(dim) +
                                " does not match map input_dim " +
                                std::to_string(map.input_dim()));
}

/// phi(x)_i = sqrt(2/D) cos(omega_i . x + b_i)
inline Eigen::VectorXd apply_rff(const RffMap& map, const Eigen::VectorXd& x) {
  check_rff_input(map, x.size());
  if (!x.allFinite()) throw std::invalid_argument("apply_rff: input must be finite");
  Eigen::VectorXd z = map.frequencies * x + map.phases;
  return map.scale() * z.array().cos().matrix();
}

/// Batched variant: rows of X are inputs, rows of the result are features.
inline Eigen::MatrixXd apply_rff_rows(const RffMap& map, const Eigen::MatrixXd& X) {
  check_rff_input(map, X.cols());
  Eigen::MatrixXd z = X * map.frequencies.transpose();
  z.rowwise() += map.phases.transpose();
  return map.scale() * z.array().cos().matrix();
}

inline double gaussian_kernel_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                    double bandwidth) {
  if (x.size() != y.size())
    throw std::invalid_argument("gaussian_kernel_exact: dimension mismatch");
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("gaussian_kernel_exact: bandwidth must be > 0");
  const double d2 = (x - y).squaredNorm();
  return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
}

using VectorPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// max over pairs of |phi(x).phi(y) - k(x, y)|
inline double kernel_approx_error(const RffMap& map, const std::vector<VectorPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("kernel_approx_error: empty pair list");
  double worst = 0.0;
  for (const auto& [x, y] : pairs) {
    const double est = apply_rff(map, x).dot(apply_rff(map, y));
    const double exact = gaussian_kernel_exact(x, y, map.bandwidth);
    worst = std::max(worst, std::abs(est - exact));
  }
  return worst;
}

// --- serialization -----------------------------------------------------------
//
// The record stores (dims, bandwidth, seed); loading re-samples the map from
// the seed, which reproduces it bit-identically.

inline void save_rff(const RffMap& map, std::ostream& os) {
  os << "rffmap 1\n"
     << "input_dim " << map.input_dim() << "\n"
     << "n_features " << map.n_features() << "\n"
     << "bandwidth " << double_repr(map.bandwidth) << "\n"
     << "seed " << map.seed << "\n";
}

inline RffMap load_rff(std::istream& is) {
  std::string word;
  int version = 0;
  is >> word >> version;
  if (word != "rffmap" || version != 1)
    throw std::runtime_error("load_rff: unrecognized record header");
  int input_dim = 0, n_features = 0;
  double bandwidth = 0.0;
  std::uint64_t seed = 0;
  is >> word >> input_dim >> word >> n_features >> word >> bandwidth >> word >> seed;
  if (!is) throw std::runtime_error("load_rff: truncated record");
  return sample_rff(input_dim, n_features, bandwidth, seed);
}

/// Debug export: one CSV row of features per input row.
inline void export_features_csv(const RffMap& map, const Eigen::MatrixXd& X,
                                std::ostream& os) {
  const Eigen::MatrixXd phi = apply_rff_rows(map, X);
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      if (j > 0) os << ',';
      os << double_repr(phi(i, j));
    }
    os << '\n';
  }
}

}  // namespace rffrl
