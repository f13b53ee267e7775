#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rffrl/bench.hpp"
#include "rffrl/experiment.hpp"
#include "rffrl/version.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, int replicates) {
  const rffrl::ExperimentConfig cfg = rffrl::parse_config_text(rffrl::read_file(config_path));
  const std::uint64_t master = seed_override.value_or(cfg.master_seed);

  if (replicates <= 1) {
    const rffrl::RunSummary summary = rffrl::run_experiment(cfg, out_dir, master);
    std::printf("final cumulative regret: %s\n",
                rffrl::double_repr(summary.final_cum_regret).c_str());
    if (summary.invariant_violation) {
      std::fprintf(stderr, "invariant violation: %s\n", summary.violation_message.c_str());
      return 1;
    }
    return 0;
  }

  // Independent seeds fan out concurrently; each replicate owns its own
  // output directory, then the ledgers are merged for plotting.
  std::vector<rffrl::RunSummary> summaries(replicates);
  std::vector<std::string> errors(replicates);
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(replicates)));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < replicates; i = next.fetch_add(1)) {
      char name[16];
      std::snprintf(name, sizeof(name), "rep%02d", i);
      try {
        summaries[i] = rffrl::run_experiment(cfg, fs::path(out_dir) / name,
                                             rffrl::derive_seed(master, "replicate", i));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int status = 0;
  std::vector<fs::path> ledgers;
  for (int i = 0; i < replicates; ++i) {
    if (!errors[i].empty()) {
      std::fprintf(stderr, "replicate %d failed: %s\n", i, errors[i].c_str());
      status = 1;
      continue;
    }
    ledgers.push_back(summaries[i].ledger_path);
    std::printf("replicate %02d final cumulative regret: %s\n", i,
                rffrl::double_repr(summaries[i].final_cum_regret).c_str());
    if (summaries[i].invariant_violation) {
      std::fprintf(stderr, "replicate %d invariant violation: %s\n", i,
                   summaries[i].violation_message.c_str());
      status = 1;
    }
  }
  if (!ledgers.empty()) rffrl::plotdata_merge(ledgers, fs::path(out_dir) / "merged.csv");
  return status;
}

int cmd_bench(const std::string& suite, const std::string& out_dir, std::uint64_t seed) {
  const std::vector<rffrl::BenchRow> rows = rffrl::run_bench_suite(suite, seed);
  fs::create_directories(out_dir);
  rffrl::atomic_write_file(fs::path(out_dir) / "bench_report.csv",
                           rffrl::bench_report_csv(rows));
  int failures = 0;
  for (const auto& r : rows) {
    // per-instance rows stay in the CSV; print only the aggregate checks
    if (r.check.find("_instance_") != std::string::npos) {
      if (!r.pass) ++failures;
      continue;
    }
    std::printf("[%s] %s/%s: lhs=%s rhs=%s\n", r.pass ? "pass" : "FAIL", r.suite.c_str(),
                r.check.c_str(), rffrl::double_repr(r.lhs).c_str(),
                rffrl::double_repr(r.rhs).c_str());
    if (!r.pass) ++failures;
  }
  if (failures > 0) {
    std::fprintf(stderr, "%d bench check(s) failed\n", failures);
    return 1;
  }
  return 0;
}

int cmd_plotdata(const std::vector<std::string>& ledgers, const std::string& out_path) {
  std::vector<fs::path> paths(ledgers.begin(), ledgers.end());
  rffrl::plotdata_merge(paths, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-Fourier model-based RL experiments"};
  app.set_version_flag("--version", std::string(rffrl::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", suite = "all", plot_out;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t bench_seed = 20240601;
  int replicates = 1;
  std::vector<std::string> ledger_paths;

  CLI::App* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("--config", config_path, "JSON config (or manifest) path")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "override the config master seed");
  run->add_option("--replicates", replicates, "number of independent seeded replicates")
      ->check(CLI::PositiveNumber);

  CLI::App* bench = app.add_subcommand("bench", "run theory validation suites");
  bench->add_option("--suite", suite, "kernel | bounds | eluder | lemmas | coverage | all");
  bench->add_option("--out", out_dir, "output directory");
  bench->add_option("--seed", bench_seed, "bench master seed");

  CLI::App* plot = app.add_subcommand("plotdata", "merge ledger CSVs for plotting");
  plot->add_option("ledgers", ledger_paths, "ledger CSV paths")->required()->expected(-1);
  plot->add_option("--out", plot_out, "merged CSV output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed_override, replicates);
    if (bench->parsed()) return cmd_bench(suite, out_dir, bench_seed);
    if (plot->parsed()) return cmd_plotdata(ledger_paths, plot_out);
  } catch (const rffrl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
