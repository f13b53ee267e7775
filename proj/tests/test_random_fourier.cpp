#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <vector>

#include "rffrl/random_fourier.hpp"

using namespace rffrl;

namespace {

std::vector<VectorPair> random_pairs(int n, int dim, double max_dist, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VectorPair> pairs;
  pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = rng.uniform_vector(dim, -2.0, 2.0);
    Eigen::VectorXd dir = rng.normal_vector(dim);
    dir.normalize();
    const double r = rng.uniform(0.0, max_dist);
    pairs.emplace_back(x, x + r * dir);
  }
  return pairs;
}

}  // namespace

TEST_SUITE_BEGIN("random_fourier");

TEST_CASE("sample_rff shape contract and phase range") {
  const RffMap map = sample_rff(1, 1, 1.0, 7);
  CHECK(map.frequencies.rows() == 1);
  CHECK(map.frequencies.cols() == 1);
  CHECK(map.phases.size() == 1);
  CHECK(map.phases(0) >= 0.0);
  CHECK(map.phases(0) < kTwoPi);
}

TEST_CASE("sample_rff empirical frequency variance approaches 1/sigma^2") {
  // sample-variance oracle over the drawn matrix
  const double sigma = 0.5;
  const RffMap map = sample_rff(3, 4096, sigma, 0);
  const double target = 1.0 / (sigma * sigma);
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd col = map.frequencies.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (col.size() - 1);
    CHECK(var == doctest::Approx(target).epsilon(0.10));
  }
}

TEST_CASE("sample_rff rejects invalid arguments") {
  CHECK_THROWS_AS(sample_rff(2, 0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_rff(0, 4, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_rff(2, 4, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_rff(2, 4, -1.0, 0), std::invalid_argument);
}

TEST_CASE("sample_rff is deterministic given seed") {
  const RffMap a = sample_rff(3, 64, 0.7, 42);
  const RffMap b = sample_rff(3, 64, 0.7, 42);
  CHECK(a.frequencies == b.frequencies);
  CHECK(a.phases == b.phases);
  const RffMap c = sample_rff(3, 64, 0.7, 43);
  CHECK(a.frequencies != c.frequencies);
}

TEST_CASE("apply_rff with zero frequencies and phases gives sqrt(2/D)") {
  RffMap map = sample_rff(2, 8, 1.0, 1);
  map.frequencies.setZero();
  map.phases.setZero();
  const Eigen::VectorXd phi = apply_rff(map, Eigen::VectorXd::Constant(2, 3.7));
  for (int i = 0; i < 8; ++i) CHECK(phi(i) == doctest::Approx(std::sqrt(2.0 / 8)));
}

TEST_CASE("apply_rff entries bounded by sqrt(2/D)") {
  const RffMap map = sample_rff(3, 128, 0.5, 5);
  Rng rng(9);
  const double bound = std::sqrt(2.0 / 128) + 1e-12;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd phi = apply_rff(map, rng.uniform_vector(3, -5.0, 5.0));
    CHECK(phi.array().abs().maxCoeff() <= bound);
  }
}

TEST_CASE("apply_rff rejects dimension mismatch") {
  const RffMap map = sample_rff(3, 16, 1.0, 1);
  CHECK_THROWS_AS(apply_rff(map, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("apply_rff batched matches single evaluation") {
  const RffMap map = sample_rff(2, 64, 0.8, 3);
  Rng rng(4);
  Eigen::MatrixXd X = rng.normal_matrix(10, 2);
  const Eigen::MatrixXd Phi = apply_rff_rows(map, X);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd row = apply_rff(map, Eigen::VectorXd(X.row(i)));
    CHECK((Phi.row(i).transpose() - row).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("rff inner product tracks the exact kernel") {
  const RffMap map = sample_rff(3, 8192, 1.0, 11);
  const auto pairs = random_pairs(1000, 3, 3.0, 21);
  CHECK(kernel_approx_error(map, pairs) <= 0.05);
}

TEST_CASE("gaussian_kernel_exact analytic values") {
  Eigen::VectorXd x(2), y(2);
  x << 0.3, -1.2;
  CHECK(gaussian_kernel_exact(x, x, 2.5) == doctest::Approx(1.0));

  y = x;
  y(0) += 0.7;  // distance sigma with sigma = 0.7
  CHECK(gaussian_kernel_exact(x, y, 0.7) == doctest::Approx(std::exp(-0.5)));

  y = x;
  y(1) += 7.0;  // distance 10 sigma
  CHECK(gaussian_kernel_exact(x, y, 0.7) == doctest::Approx(std::exp(-50.0)).epsilon(1e-6));

  CHECK_THROWS_AS(gaussian_kernel_exact(x, Eigen::VectorXd::Zero(3), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kernel_exact(x, y, 0.0), std::invalid_argument);
}

TEST_CASE("kernel_approx_error on self pairs bounded by 1") {
  const RffMap map = sample_rff(2, 512, 1.0, 2);
  Rng rng(6);
  std::vector<VectorPair> pairs;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x = rng.normal_vector(2);
    pairs.emplace_back(x, x);
  }
  const double err = kernel_approx_error(map, pairs);
  CHECK(err <= 1.0);
  // self-pair error is exactly |phi(x).phi(x) - 1| for the worst x
  double expected = 0.0;
  for (const auto& [x, y] : pairs) {
    const Eigen::VectorXd phi = apply_rff(map, x);
    expected = std::max(expected, std::abs(phi.dot(phi) - 1.0));
  }
  CHECK(err == doctest::Approx(expected));
}

TEST_CASE("kernel_approx_error rejects empty list") {
  const RffMap map = sample_rff(2, 16, 1.0, 2);
  CHECK_THROWS_AS(kernel_approx_error(map, {}), std::invalid_argument);
}

TEST_CASE("approximation error shrinks as D grows (median over seeds)") {
  const auto pairs = random_pairs(100, 2, 3.0, 31);
  std::vector<double> small_err, big_err;
  for (std::uint64_t s = 0; s < 20; ++s) {
    small_err.push_back(kernel_approx_error(sample_rff(2, 16, 1.0, 100 + s), pairs));
    big_err.push_back(kernel_approx_error(sample_rff(2, 4096, 1.0, 100 + s), pairs));
  }
  std::sort(small_err.begin(), small_err.end());
  std::sort(big_err.begin(), big_err.end());
  CHECK(small_err[10] > big_err[10]);
}

TEST_CASE("single pair at distance sigma, D=8192") {
  const RffMap map = sample_rff(2, 8192, 1.0, 17);
  Eigen::VectorXd x(2), y(2);
  x << 0.2, 0.4;
  y << 0.2 + 1.0, 0.4;
  CHECK(kernel_approx_error(map, {{x, y}}) <= 0.05);
}

TEST_CASE("unbiasedness over resampled maps") {
  const auto pairs = random_pairs(5, 2, 3.0, 41);
  for (const auto& [x, y] : pairs) {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
      const RffMap map = sample_rff(2, 256, 1.0, 1000 + s);
      acc += apply_rff(map, x).dot(apply_rff(map, y));
    }
    const double mean = acc / 200.0;
    const double exact = gaussian_kernel_exact(x, y, 1.0);
    CHECK(std::abs(mean - exact) <= 0.02);
  }
}

TEST_CASE("concentration: D=4096 beats D=64 on at least 95% of seed pairs") {
  const auto pairs = random_pairs(50, 2, 3.0, 51);
  int wins = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double coarse = kernel_approx_error(sample_rff(2, 64, 1.0, 7000 + s), pairs);
    const double fine = kernel_approx_error(sample_rff(2, 4096, 1.0, 8000 + s), pairs);
    if (fine <= coarse) ++wins;
  }
  CHECK(wins >= 48);  // 95% of 50 = 47.5
}

TEST_CASE("feature matrix CSV export matches apply_rff") {
  const RffMap map = sample_rff(2, 4, 1.0, 9);
  Rng rng(10);
  const Eigen::MatrixXd X = rng.normal_matrix(3, 2);
  std::stringstream ss;
  export_features_csv(map, X, ss);
  const Eigen::MatrixXd phi = apply_rff_rows(map, X);
  std::string line;
  int row = 0;
  while (std::getline(ss, line)) {
    std::istringstream ls(line);
    std::string cell;
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      CHECK(std::stod(cell) == doctest::Approx(phi(row, col)).epsilon(1e-15));
      ++col;
    }
    CHECK(col == 4);
    ++row;
  }
  CHECK(row == 3);
}

TEST_CASE("rff map serialization round-trips bit-identically") {
  const RffMap map = sample_rff(4, 32, 0.3, 77);
  std::stringstream ss;
  save_rff(map, ss);
  const RffMap loaded = load_rff(ss);
  CHECK(loaded.frequencies == map.frequencies);
  CHECK(loaded.phases == map.phases);
  CHECK(loaded.bandwidth == map.bandwidth);
  CHECK(loaded.seed == map.seed);
}

TEST_SUITE_END();
