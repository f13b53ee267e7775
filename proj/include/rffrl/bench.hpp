#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rffrl/agents.hpp"
#include "rffrl/io.hpp"
#include "rffrl/random_fourier.hpp"
#include "rffrl/theory_bench.hpp"

namespace rffrl {

/// One bench check: `lhs` is the measured quantity, `rhs` the bound or
/// threshold it is compared against, with Monte Carlo standard errors where
/// applicable.
struct BenchRow {
  std::string suite;
  std::string check;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  std::uint64_t seed = 0;
};

inline std::string bench_report_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "suite,check,lhs,rhs,pass,lhs_se,rhs_se,seed\n";
  for (const auto& r : rows)
    os << r.suite << ',' << r.check << ',' << double_repr(r.lhs) << ',' << double_repr(r.rhs)
       << ',' << (r.pass ? 1 : 0) << ',' << double_repr(r.lhs_se) << ','
       << double_repr(r.rhs_se) << ',' << r.seed << '\n';
  return os.str();
}

inline bool bench_all_passed(const std::vector<BenchRow>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

namespace benchdetail {

inline std::vector<VectorPair> kernel_pairs(int n, int dim, double max_dist,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VectorPair> pairs;
  pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = rng.uniform_vector(dim, -2.0, 2.0);
    Eigen::VectorXd dir = rng.normal_vector(dim);
    dir.normalize();
    pairs.emplace_back(x, x + rng.uniform(0.0, max_dist) * dir);
  }
  return pairs;
}

struct LemmaInstanceSetup {
  SyntheticLinearEnv env;
  ModelClass cls;
  RffMap rff;
  PlannerConfig cfg;
};

inline LemmaInstanceSetup lemma_setup(std::uint64_t seed) {
  SyntheticLinearParams p;
  p.feature_dim = 16;
  p.seed = seed;
  LemmaInstanceSetup s{make_synthetic_linear(p), {}, {}, {}};
  s.cls = ModelClass{s.env.psi, s.env.param_bound, s.env.spec.output_bound};
  s.rff = sample_rff(2, 64, p.noise_std, derive_seed(seed, "lemma-rff"));
  s.cfg.n_anchors = 128;
  s.cfg.n_mesh_states = 8;
  s.cfg.n_mc = 4;
  s.cfg.noise_std = p.noise_std;
  s.cfg.state_lo = s.env.spec.state_lo;
  s.cfg.state_hi = s.env.spec.state_hi;
  return s;
}

}  // namespace benchdetail

/// Random-Fourier factorization quality: max kernel error at D=8192 over 1000
/// nearby pairs, unbiasedness over resampled maps, and concentration in D.
inline std::vector<BenchRow> bench_kernel(std::uint64_t seed) {
  std::vector<BenchRow> rows;

  {
    const RffMap map = sample_rff(3, 8192, 1.0, derive_seed(seed, "kernel-map"));
    const auto pairs = benchdetail::kernel_pairs(1000, 3, 3.0, derive_seed(seed, "kernel-pairs"));
    const double err = kernel_approx_error(map, pairs);
    rows.push_back({"kernel", "max_abs_error_D8192_1000pairs", err, 0.05, err <= 0.05, 0, 0, seed});
  }
  {
    const auto pairs = benchdetail::kernel_pairs(3, 2, 3.0, derive_seed(seed, "unbias-pairs"));
    double worst = 0.0;
    for (const auto& [x, y] : pairs) {
      double acc = 0.0;
      for (std::uint64_t s = 0; s < 200; ++s)
        acc += apply_rff(sample_rff(2, 256, 1.0, derive_seed(seed, "unbias-map", s)), x)
                   .dot(apply_rff(sample_rff(2, 256, 1.0, derive_seed(seed, "unbias-map", s)), y));
      worst = std::max(worst, std::abs(acc / 200.0 - gaussian_kernel_exact(x, y, 1.0)));
    }
    rows.push_back({"kernel", "unbiasedness_mean_dev_D256_200seeds", worst, 0.02, worst <= 0.02,
                    0, 0, seed});
  }
  {
    const auto pairs = benchdetail::kernel_pairs(50, 2, 3.0, derive_seed(seed, "conc-pairs"));
    int wins = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const double coarse =
          kernel_approx_error(sample_rff(2, 64, 1.0, derive_seed(seed, "conc-coarse", s)), pairs);
      const double fine =
          kernel_approx_error(sample_rff(2, 4096, 1.0, derive_seed(seed, "conc-fine", s)), pairs);
      if (fine <= coarse) ++wins;
    }
    const double rate = wins / 50.0;
    rows.push_back({"kernel", "concentration_win_rate_D4096_vs_D64", rate, 0.95, rate >= 0.95,
                    0, 0, seed});
  }
  return rows;
}

/// Closed-form spot values and scaling behavior of the covering, eluder, and
/// regret bounds.
inline std::vector<BenchRow> bench_bounds(std::uint64_t seed) {
  std::vector<BenchRow> rows;
  const LinearClassParams unit{1, 1, 1.0, 1.0};

  const double covering = covering_number_bound(unit, 1.0);
  rows.push_back({"bounds", "covering_spot_d1_W1_B1_eps1", covering, 3.0,
                  covering == 3.0, 0, 0, seed});

  const double e = std::exp(1.0);
  const double eluder_indep = 3.0 * e / (e - 1.0) * std::log(15.0) + 1.0;
  const double eluder = eluder_dimension_bound(unit, 1.0);
  rows.push_back({"bounds", "eluder_spot_vs_independent_eval", eluder, eluder_indep,
                  std::abs(eluder - eluder_indep) <= 1e-10 * eluder_indep, 0, 0, seed});

  const LinearClassParams p{4, 2, 1.0, 1.0};
  double worst_ratio = 0.0;
  for (long long K : {100LL, 1000LL, 10000LL}) {
    const double r = regret_bound_eval(p, 4 * K, 10, 0.1, 1.0, 2, 0.25, RegretBoundVariant::plain) /
                     regret_bound_eval(p, K, 10, 0.1, 1.0, 2, 0.25, RegretBoundVariant::plain);
    worst_ratio = std::max(worst_ratio, r);
  }
  rows.push_back({"bounds", "sublinear_ratio_4K_over_K", worst_ratio, 4.0, worst_ratio < 4.0,
                  0, 0, seed});

  {
    const LinearClassParams q{4, 1, 1.0, 1.0};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 5;
    for (int i = 0; i < n; ++i) {
      const double T = std::pow(10.0, 8 + i);
      const double x = std::log(T);
      const double y = std::log(
          regret_bound_eval(q, (long long)T, 1, 0.1, 1.0, 1, 0.25, RegretBoundVariant::plain));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rows.push_back({"bounds", "plain_loglog_slope_H1", slope, 0.5,
                    std::abs(slope - 0.5) <= 0.05, 0, 0, seed});
  }

  {
    const LinearClassParams q{3, 2, 1.2, 0.9};
    double worst = 0.0;
    for (double sigma : {0.2, 0.02}) {
      const double got =
          regret_bound_eval(q, 500, 10, sigma, 1.0, 2, 0.25, RegretBoundVariant::improved);
      const double T = 5000.0;
      const double alpha = sigma * sigma / std::sqrt(T);
      const double beta =
          beta_radius(covering_log_bound(q, alpha), 0.25, alpha, 500, 10, sigma, 1.0, 2);
      const double dim = eluder_dimension_bound(q, alpha);
      const double indep =
          std::sqrt(100.0 * T * (8.0 * beta / (sigma * sigma) + 1.0) * dim *
                    (1.0 + std::log(T))) +
          5.0 + 100.0 * dim;
      worst = std::max(worst, std::abs(got - indep) / indep);
    }
    rows.push_back({"bounds", "improved_variant_independent_recomposition", worst, 1e-12,
                    worst <= 1e-12, 0, 0, seed});
  }
  return rows;
}

/// Exact brute-force eluder dimension against the closed-form bound.
inline std::vector<BenchRow> bench_eluder(std::uint64_t seed) {
  std::vector<BenchRow> rows;

  const int single = eluder_bruteforce({Eigen::VectorXd::Ones(1)}, 10.0, 0.1);
  rows.push_back({"eluder", "single_point_sequence", double(single), 1.0, single == 1, 0, 0, seed});

  std::vector<Eigen::VectorXd> basis;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
    b(i) = 1.0;
    basis.push_back(b);
  }
  const int ortho = eluder_bruteforce(basis, 100.0, 0.01);
  rows.push_back({"eluder", "orthonormal_basis_dim3", double(ortho), 3.0, ortho == 3, 0, 0, seed});

  Rng rng(derive_seed(seed, "eluder-instances"));
  int within = 0;
  const int instances = 50;
  for (int inst = 0; inst < instances; ++inst) {
    std::vector<Eigen::VectorXd> feats;
    double maxnorm = 0.0;
    for (int i = 0; i < 8; ++i) {
      Eigen::VectorXd f = rng.normal_vector(2);
      f *= rng.uniform(0.2, 1.0) / f.norm();
      maxnorm = std::max(maxnorm, f.norm());
      feats.push_back(f);
    }
    const double W = rng.uniform(0.5, 2.0);
    const double eps = rng.uniform(0.1, 1.0);
    const int brute = eluder_bruteforce(feats, W, eps);
    if (double(brute) <= eluder_dimension_bound({2, 2, W, maxnorm}, eps)) ++within;
  }
  const double rate = double(within) / instances;
  rows.push_back({"eluder", "bruteforce_within_bound_50_instances", rate, 1.0, rate == 1.0,
                  0, 0, seed});
  return rows;
}

/// Randomized validation of the simulation and expectation-difference
/// inequalities; per-instance rows plus a pass-rate summary per lemma.
inline std::vector<BenchRow> bench_lemmas(std::uint64_t seed, int sim_instances = 200,
                                          int gap_instances = 500) {
  std::vector<BenchRow> rows;

  int sim_passes = 0;
  for (int i = 0; i < sim_instances; ++i) {
    const auto setup = benchdetail::lemma_setup(derive_seed(seed, "sim-env", i % 8));
    const LinearDynamicsModel fhat =
        posterior_sample(History{}, setup.cls, PosteriorConfig{0.04, 0.1, 0.3},
                         derive_seed(seed, "sim-model", i));
    const Policy pol = plan_dp(model_dynamics_fn(fhat), setup.rff, env_reward_fn(setup.env.spec),
                               setup.env.spec.horizon, setup.env.spec.actions, setup.cfg,
                               derive_seed(seed, "sim-plan", i));
    const IneqCheck c =
        simulation_lemma_check(setup.env.spec, fhat, pol, 250, derive_seed(seed, "sim-mc", i));
    if (c.pass) ++sim_passes;
    rows.push_back({"lemmas", "simulation_lemma_instance_" + std::to_string(i), c.lhs, c.rhs,
                    c.pass, c.lhs_se, c.rhs_se, seed});
  }
  const double sim_rate = double(sim_passes) / sim_instances;
  rows.push_back({"lemmas", "simulation_lemma_pass_rate", sim_rate, 0.99, sim_rate >= 0.99,
                  0, 0, seed});

  int gap_passes = 0;
  Rng rng(derive_seed(seed, "gap-instances"));
  for (int i = 0; i < gap_instances; ++i) {
    const RffMap gmap = sample_rff(2, 32, 1.0, derive_seed(seed, "gap-g", i));
    Rng wrng(derive_seed(seed, "gap-w", i));
    const Eigen::VectorXd c = wrng.normal_vector(32);
    const auto g = [gmap, c](const Eigen::VectorXd& z) {
      const double v = apply_rff(gmap, z).dot(c);
      return v * v;
    };
    const Eigen::VectorXd mu1 = rng.uniform_vector(2, -1.0, 1.0);
    const Eigen::VectorXd mu2 = rng.uniform_vector(2, -1.0, 1.0);
    const double sigma = rng.uniform(0.2, 1.0);
    const IneqCheck ck =
        expectation_gap_check(g, mu1, mu2, sigma, 1500, derive_seed(seed, "gap-mc", i));
    if (ck.pass) ++gap_passes;
    rows.push_back({"lemmas", "expectation_gap_instance_" + std::to_string(i), ck.lhs, ck.rhs,
                    ck.pass, ck.lhs_se, ck.rhs_se, seed});
  }
  const double gap_rate = double(gap_passes) / gap_instances;
  rows.push_back({"lemmas", "expectation_gap_pass_rate", gap_rate, 0.99, gap_rate >= 0.99,
                  0, 0, seed});
  return rows;
}

/// Empirical confidence-set coverage against the 1 - 2 delta guarantee, plus
/// the inflated- and zero-radius degenerate checks.
inline std::vector<BenchRow> bench_coverage(std::uint64_t seed) {
  std::vector<BenchRow> rows;
  SyntheticLinearParams p;
  p.feature_dim = 32;
  p.horizon = 10;
  const auto env = make_synthetic_linear(p);

  const double delta = 0.125;
  const double nominal =
      confidence_coverage_experiment(env, 1e-6, 15, 100, delta, 0.01, derive_seed(seed, "cov"));
  rows.push_back({"coverage", "all_k_coverage_100_runs_delta_0.125", nominal, 1.0 - 2 * delta,
                  nominal >= 1.0 - 2 * delta, 0, 0, seed});

  const double inflated = confidence_coverage_experiment(env, 1e-6, 5, 20, delta, 0.01,
                                                         derive_seed(seed, "cov-wide"), 1e4);
  rows.push_back({"coverage", "inflated_radius_full_coverage", inflated, 1.0, inflated == 1.0,
                  0, 0, seed});

  const double zero = confidence_coverage_experiment(env, 1e-6, 5, 20, delta, 0.01,
                                                     derive_seed(seed, "cov-zero"), 0.0);
  rows.push_back({"coverage", "zero_radius_no_coverage", zero, 0.0, zero == 0.0, 0, 0, seed});
  return rows;
}

inline std::vector<BenchRow> run_bench_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "kernel") return bench_kernel(seed);
  if (suite == "bounds") return bench_bounds(seed);
  if (suite == "eluder") return bench_eluder(seed);
  if (suite == "lemmas") return bench_lemmas(seed);
  if (suite == "coverage") return bench_coverage(seed);
  if (suite == "all") {
    std::vector<BenchRow> rows;
    for (const char* name : {"kernel", "bounds", "eluder", "lemmas", "coverage"}) {
      auto part = run_bench_suite(name, seed);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
  }
  throw std::invalid_argument("unknown bench suite '" + suite +
                              "' (expected kernel | bounds | eluder | lemmas | coverage | all)");
}

}  // namespace rffrl
