#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rffrl/agents.hpp"
#include "rffrl/io.hpp"
#include "rffrl/version.hpp"

namespace rffrl {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;

namespace cfgdetail {

inline const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  return j;
}

template <typename T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": wrong type");
  }
}

template <typename T>
T require(const json& j, const std::string& section, const char* key) {
  if (!j.contains(key)) throw ConfigError(section + "." + key + ": missing required field");
  return get_as<T>(j.at(key), section + "." + key);
}

template <typename T>
T get_or(const json& j, const std::string& section, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_as<T>(j.at(key), section + "." + key);
}

inline void reject_unknown(const json& j, const std::string& section,
                           const std::vector<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) ok = true;
    if (!ok) throw ConfigError(section + "." + key + ": unknown field");
  }
}

}  // namespace cfgdetail

/// Parsed and validated run configuration. All randomness in a run flows from
/// master_seed through named derive_seed streams; nothing is wall-clock
/// seeded.
struct ExperimentConfig {
  json raw;  // resolved echo for the manifest
  std::uint64_t master_seed = 0;

  std::string env_name;
  SyntheticLinearParams synthetic;
  PendulumParams pendulum;
  MountainCarParams mountain_car;

  std::string feature_source;  // "env" (realizable psi) or "rff"
  int model_feature_dim = 48;
  double model_feature_bandwidth = 1.0;
  bool model_feature_seed_set = false;
  std::uint64_t model_feature_seed = 0;
  double param_bound = 1.25;
  double ridge = 0.0;  // 0 means "use the Bayes default noise_scale^2 / prior_scale^2"
  double prior_scale = 0.4;
  double noise_scale = -1.0;  // negative means "use the environment noise level"

  int planner_rff_dim = 1024;
  PlannerConfig planner;  // state box and noise_std filled from the env at prepare time

  std::string agent_kind;  // ts | ucb | ce | oracle
  int episodes = 10;
  int eval_rollouts = 100;
  int oracle_rollouts = 2000;
  int oracle_plans = 3;
  bool clip_regret = true;
  int spread_samples = 0;
  int n_candidates = 8;
  double conf_delta = 0.125;
  double cover_alpha = 0.01;
};

inline ExperimentConfig parse_config(const json& root) {
  cfgdetail::require_object(root, "config");
  cfgdetail::reject_unknown(root, "config",
                            {"schema_version", "master_seed", "env", "model", "planner", "agent"});

  const int version = cfgdetail::require<int>(root, "config", "schema_version");
  if (version != kConfigSchemaVersion)
    throw ConfigError("config.schema_version: expected " +
                      std::to_string(kConfigSchemaVersion) + ", got " + std::to_string(version));

  ExperimentConfig cfg;
  cfg.raw = root;
  cfg.master_seed = cfgdetail::require<std::uint64_t>(root, "config", "master_seed");

  // --- env ---
  const json env = root.contains("env") ? root.at("env") : json();
  cfgdetail::require_object(env, "env");
  cfgdetail::reject_unknown(
      env, "env",
      {"name", "horizon", "noise_std", "seed", "feature_dim", "feature_bandwidth", "n_actions",
       "action_radius", "dynamics_scale", "output_bound", "box_halfwidth", "goal",
       "reward_lengthscale", "max_torque", "n_torques", "max_force", "n_forces"});
  cfg.env_name = cfgdetail::require<std::string>(env, "env", "name");
  if (cfg.env_name == "synthetic-linear") {
    SyntheticLinearParams& p = cfg.synthetic;
    p.horizon = cfgdetail::get_or(env, "env", "horizon", p.horizon);
    p.noise_std = cfgdetail::get_or(env, "env", "noise_std", p.noise_std);
    p.seed = cfgdetail::get_or<std::uint64_t>(env, "env", "seed", p.seed);
    p.feature_dim = cfgdetail::get_or(env, "env", "feature_dim", p.feature_dim);
    p.feature_bandwidth = cfgdetail::get_or(env, "env", "feature_bandwidth", p.feature_bandwidth);
    p.n_actions = cfgdetail::get_or(env, "env", "n_actions", p.n_actions);
    p.action_radius = cfgdetail::get_or(env, "env", "action_radius", p.action_radius);
    p.dynamics_scale = cfgdetail::get_or(env, "env", "dynamics_scale", p.dynamics_scale);
    p.output_bound = cfgdetail::get_or(env, "env", "output_bound", p.output_bound);
    p.box_halfwidth = cfgdetail::get_or(env, "env", "box_halfwidth", p.box_halfwidth);
    p.reward_lengthscale = cfgdetail::get_or(env, "env", "reward_lengthscale", p.reward_lengthscale);
    if (env.contains("goal")) {
      const auto g = cfgdetail::get_as<std::vector<double>>(env.at("goal"), "env.goal");
      if (g.size() != 2) throw ConfigError("env.goal: expected 2 entries");
      p.goal = Eigen::Vector2d(g[0], g[1]);
    }
    if (p.horizon < 1 || !(p.noise_std > 0.0))
      throw ConfigError("env: horizon must be >= 1 and noise_std > 0");
  } else if (cfg.env_name == "pendulum-swingup") {
    PendulumParams& p = cfg.pendulum;
    p.horizon = cfgdetail::get_or(env, "env", "horizon", p.horizon);
    p.noise_std = cfgdetail::get_or(env, "env", "noise_std", p.noise_std);
    p.max_torque = cfgdetail::get_or(env, "env", "max_torque", p.max_torque);
    p.n_torques = cfgdetail::get_or(env, "env", "n_torques", p.n_torques);
  } else if (cfg.env_name == "continuous-mountain-car") {
    MountainCarParams& p = cfg.mountain_car;
    p.horizon = cfgdetail::get_or(env, "env", "horizon", p.horizon);
    p.noise_std = cfgdetail::get_or(env, "env", "noise_std", p.noise_std);
    p.max_force = cfgdetail::get_or(env, "env", "max_force", p.max_force);
    p.n_forces = cfgdetail::get_or(env, "env", "n_forces", p.n_forces);
  } else {
    throw ConfigError("env.name: unknown environment '" + cfg.env_name +
                      "' (expected synthetic-linear | pendulum-swingup | continuous-mountain-car)");
  }

  // --- model ---
  const json model = root.contains("model") ? root.at("model") : json::object();
  cfgdetail::require_object(model, "model");
  cfgdetail::reject_unknown(model, "model",
                            {"feature_source", "feature_dim", "feature_bandwidth", "feature_seed",
                             "param_bound", "ridge", "prior_scale", "noise_scale"});
  cfg.feature_source = cfgdetail::get_or<std::string>(
      model, "model", "feature_source",
      cfg.env_name == "synthetic-linear" ? "env" : "rff");
  if (cfg.feature_source != "env" && cfg.feature_source != "rff")
    throw ConfigError("model.feature_source: expected env | rff");
  if (cfg.feature_source == "env" && cfg.env_name != "synthetic-linear")
    throw ConfigError("model.feature_source: 'env' is only available for synthetic-linear");
  cfg.model_feature_dim = cfgdetail::get_or(model, "model", "feature_dim", cfg.model_feature_dim);
  cfg.model_feature_bandwidth =
      cfgdetail::get_or(model, "model", "feature_bandwidth", cfg.model_feature_bandwidth);
  if (model.contains("feature_seed")) {
    cfg.model_feature_seed_set = true;
    cfg.model_feature_seed =
        cfgdetail::get_as<std::uint64_t>(model.at("feature_seed"), "model.feature_seed");
  }
  cfg.param_bound = cfgdetail::get_or(model, "model", "param_bound",
                                      cfg.env_name == "synthetic-linear"
                                          ? cfg.synthetic.param_bound
                                          : cfg.param_bound);
  cfg.prior_scale = cfgdetail::get_or(model, "model", "prior_scale", cfg.prior_scale);
  cfg.noise_scale = cfgdetail::get_or(model, "model", "noise_scale", cfg.noise_scale);
  cfg.ridge = cfgdetail::get_or(model, "model", "ridge", cfg.ridge);
  if (cfg.param_bound <= 0.0) throw ConfigError("model.param_bound: must be > 0");

  // --- planner ---
  const json planner = root.contains("planner") ? root.at("planner") : json::object();
  cfgdetail::require_object(planner, "planner");
  cfgdetail::reject_unknown(planner, "planner",
                            {"rff_dim", "n_anchors", "n_mesh_states", "n_mc", "ridge_scale",
                             "clip_values", "eval_chunk"});
  cfg.planner_rff_dim = cfgdetail::get_or(planner, "planner", "rff_dim", cfg.planner_rff_dim);
  cfg.planner.n_anchors = cfgdetail::get_or(planner, "planner", "n_anchors", cfg.planner.n_anchors);
  cfg.planner.n_mesh_states =
      cfgdetail::get_or(planner, "planner", "n_mesh_states", cfg.planner.n_mesh_states);
  cfg.planner.n_mc = cfgdetail::get_or(planner, "planner", "n_mc", cfg.planner.n_mc);
  cfg.planner.ridge_scale =
      cfgdetail::get_or(planner, "planner", "ridge_scale", cfg.planner.ridge_scale);
  cfg.planner.clip_values =
      cfgdetail::get_or(planner, "planner", "clip_values", cfg.planner.clip_values);
  cfg.planner.eval_chunk = cfgdetail::get_or(planner, "planner", "eval_chunk", cfg.planner.eval_chunk);
  if (cfg.planner_rff_dim < 1 || cfg.planner.n_anchors < 1 || cfg.planner.n_mc < 1)
    throw ConfigError("planner: rff_dim, n_anchors, n_mc must be >= 1");

  // --- agent ---
  const json agent = root.contains("agent") ? root.at("agent") : json();
  cfgdetail::require_object(agent, "agent");
  cfgdetail::reject_unknown(agent, "agent",
                            {"kind", "episodes", "eval_rollouts", "oracle_rollouts",
                             "oracle_plans", "clip_regret", "spread_samples", "n_candidates",
                             "delta", "alpha"});
  cfg.agent_kind = cfgdetail::require<std::string>(agent, "agent", "kind");
  if (cfg.agent_kind != "ts" && cfg.agent_kind != "ucb" && cfg.agent_kind != "ce" &&
      cfg.agent_kind != "oracle")
    throw ConfigError("agent.kind: unknown value '" + cfg.agent_kind +
                      "' (expected ts | ucb | ce | oracle)");
  cfg.episodes = cfgdetail::get_or(agent, "agent", "episodes", cfg.episodes);
  cfg.eval_rollouts = cfgdetail::get_or(agent, "agent", "eval_rollouts", cfg.eval_rollouts);
  cfg.oracle_rollouts = cfgdetail::get_or(agent, "agent", "oracle_rollouts", cfg.oracle_rollouts);
  cfg.oracle_plans = cfgdetail::get_or(agent, "agent", "oracle_plans", cfg.oracle_plans);
  cfg.clip_regret = cfgdetail::get_or(agent, "agent", "clip_regret", cfg.clip_regret);
  cfg.spread_samples = cfgdetail::get_or(agent, "agent", "spread_samples", cfg.spread_samples);
  cfg.n_candidates = cfgdetail::get_or(agent, "agent", "n_candidates", cfg.n_candidates);
  cfg.conf_delta = cfgdetail::get_or(agent, "agent", "delta", cfg.conf_delta);
  cfg.cover_alpha = cfgdetail::get_or(agent, "agent", "alpha", cfg.cover_alpha);
  if (cfg.episodes < 1) throw ConfigError("agent.episodes: must be >= 1");
  if (cfg.eval_rollouts < 1) throw ConfigError("agent.eval_rollouts: must be >= 1");
  if (cfg.agent_kind == "ucb" && cfg.n_candidates < 1)
    throw ConfigError("agent.n_candidates: must be >= 1");
  if (!(cfg.conf_delta > 0.0 && cfg.conf_delta < 1.0))
    throw ConfigError("agent.delta: must lie in (0, 1)");

  return cfg;
}

/// Accepts either a plain config or a run manifest (which embeds the config
/// under "config"), so a manifest replays its own run.
inline ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (root.is_object() && root.contains("manifest_version") && root.contains("config"))
    return parse_config(root.at("config"));
  return parse_config(root);
}

struct PreparedRun {
  AgentSetup setup;
  std::string agent_kind;
};

inline PreparedRun prepare_run(const ExperimentConfig& cfg,
                               std::optional<std::uint64_t> seed_override = {}) {
  const std::uint64_t master = seed_override.value_or(cfg.master_seed);

  AgentSetup setup;
  double env_sigma = 0.0;
  if (cfg.env_name == "synthetic-linear") {
    const SyntheticLinearEnv env = make_synthetic_linear(cfg.synthetic);
    setup.env = env.spec;
    env_sigma = cfg.synthetic.noise_std;
    if (cfg.feature_source == "env") {
      setup.model_class = ModelClass{env.psi, cfg.param_bound, env.spec.output_bound};
    }
  } else if (cfg.env_name == "pendulum-swingup") {
    setup.env = make_pendulum(cfg.pendulum);
    env_sigma = cfg.pendulum.noise_std;
  } else {
    setup.env = make_mountain_car(cfg.mountain_car);
    env_sigma = cfg.mountain_car.noise_std;
  }

  if (cfg.feature_source == "rff") {
    const int action_dim = int(setup.env.actions.at(0).size());
    const std::uint64_t psi_seed = cfg.model_feature_seed_set
                                       ? cfg.model_feature_seed
                                       : derive_seed(master, "model-psi");
    const RffMap psi_map = sample_rff(setup.env.state_dim + action_dim, cfg.model_feature_dim,
                                      cfg.model_feature_bandwidth, psi_seed);
    setup.model_class =
        ModelClass{make_rff_feature_map(psi_map, setup.env.state_dim, action_dim),
                   cfg.param_bound, setup.env.output_bound};
  }

  const double noise_scale = cfg.noise_scale < 0.0 ? env_sigma : cfg.noise_scale;
  const double ridge = cfg.ridge > 0.0
                           ? cfg.ridge
                           : (cfg.prior_scale > 0.0
                                  ? noise_scale * noise_scale / (cfg.prior_scale * cfg.prior_scale)
                                  : 1e-6);
  setup.posterior = PosteriorConfig{ridge, noise_scale, cfg.prior_scale};
  if (cfg.agent_kind == "ce") {
    setup.posterior.noise_scale = 0.0;
    setup.posterior.prior_scale = 0.0;
  }

  setup.planner = cfg.planner;
  setup.planner.noise_std = env_sigma;
  setup.planner.state_lo = setup.env.state_lo;
  setup.planner.state_hi = setup.env.state_hi;
  setup.planner_rff = sample_rff(setup.env.state_dim, cfg.planner_rff_dim, env_sigma,
                                 derive_seed(master, "planner-rff"));

  setup.episodes = cfg.episodes;
  setup.eval_rollouts = cfg.eval_rollouts;
  setup.oracle_rollouts = cfg.oracle_rollouts;
  setup.oracle_plans = cfg.oracle_plans;
  setup.clip_regret = cfg.clip_regret;
  setup.spread_samples = cfg.spread_samples;
  setup.n_candidates = cfg.n_candidates;
  setup.conf_delta = cfg.conf_delta;
  setup.cover_alpha = cfg.cover_alpha;

  return PreparedRun{std::move(setup), cfg.agent_kind};
}

// --- output files -------------------------------------------------------------

inline std::string ledger_csv(const RegretLedger& ledger) {
  std::ostringstream os;
  os << "episode,v_star,v_star_se,return,v_pi,v_pi_se,inst_regret,cum_regret\n";
  for (const auto& r : ledger.rows) {
    os << r.episode << ',' << double_repr(r.v_star) << ',' << double_repr(r.v_star_se) << ','
       << double_repr(r.ret) << ',' << double_repr(r.v_pi) << ',' << double_repr(r.v_pi_se)
       << ',' << double_repr(r.inst_regret) << ',' << double_repr(r.cum_regret) << '\n';
  }
  return os.str();
}

inline std::string history_csv(const History& history) {
  std::ostringstream os;
  int state_dim = 0, action_dim = 0;
  if (!history.empty()) {
    const Transition& first = history.episodes.front().steps.front();
    state_dim = int(first.state.size());
    action_dim = int(first.action.size());
  }
  os << "episode,step";
  for (int j = 0; j < state_dim; ++j) os << ",s" << j;
  for (int j = 0; j < action_dim; ++j) os << ",a" << j;
  os << ",reward";
  for (int j = 0; j < state_dim; ++j) os << ",ns" << j;
  os << '\n';
  for (const auto& episode : history.episodes) {
    for (const auto& t : episode.steps) {
      os << episode.episode_index << ',' << t.step_index;
      for (int j = 0; j < state_dim; ++j) os << ',' << double_repr(t.state(j));
      for (int j = 0; j < action_dim; ++j) os << ',' << double_repr(t.action(j));
      os << ',' << double_repr(t.reward);
      for (int j = 0; j < state_dim; ++j) os << ',' << double_repr(t.next_state(j));
      os << '\n';
    }
  }
  return os.str();
}

struct RunSummary {
  double final_cum_regret = 0.0;
  bool invariant_violation = false;
  std::string violation_message;
  std::filesystem::path ledger_path;
};

/// Run a configured experiment and write manifest.json, ledger.csv, and
/// history.csv into out_dir. Files are written atomically at run end;
/// re-running the same config and master seed reproduces the CSVs
/// byte-identically.
inline RunSummary run_experiment(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir,
                                 std::optional<std::uint64_t> seed_override = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t master = seed_override.value_or(cfg.master_seed);

  const auto started = std::chrono::system_clock::now();
  const auto tic = std::chrono::steady_clock::now();

  PreparedRun run = prepare_run(cfg, master);
  RunResult result;
  if (run.agent_kind == "ts" || run.agent_kind == "ce")
    result = run_ts(run.setup, master);
  else if (run.agent_kind == "ucb")
    result = run_ucb_approx(run.setup, master);
  else
    result = run_oracle_agent(run.setup, master);

  const auto toc = std::chrono::steady_clock::now();

  json manifest;
  manifest["manifest_version"] = 1;
  manifest["software_version"] = kVersion;
  manifest["config"] = cfg.raw;
  manifest["master_seed"] = master;
  manifest["agent_kind"] = run.agent_kind;
  manifest["seed_scheme"] =
      "splitmix64 substreams via derive_seed(master, tag, index); per-episode tags: "
      "posterior, plan, reset, execute, policy-eval, ucb-candidate; run-level tags: "
      "planner-rff, model-psi, oracle";
  manifest["started_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(started.time_since_epoch()).count();
  manifest["wall_time_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(toc - tic).count();
  manifest["oracle_value"] = {{"mean", result.oracle.mean}, {"se", result.oracle.se}};
  json episodes = json::array();
  for (const auto& d : result.diagnostics) {
    json e;
    e["episode"] = d.episode;
    e["beta"] = d.beta;
    e["width_sq_sum"] = d.width_sq_sum;
    e["planned_start_value"] = d.planned_start_value;
    if (run.agent_kind == "ucb") {
      e["center_start_value"] = d.center_start_value;
      e["candidates_kept"] = d.candidates_kept;
    }
    if (run.setup.spread_samples > 0) e["posterior_spread"] = d.posterior_spread;
    json norms = json::array();
    for (int i = 0; i < d.weight_norms.size(); ++i) norms.push_back(d.weight_norms(i));
    e["weight_norms"] = std::move(norms);
    episodes.push_back(std::move(e));
  }
  manifest["episodes"] = std::move(episodes);
  manifest["final_cum_regret"] =
      result.ledger.rows.empty() ? 0.0 : result.ledger.rows.back().cum_regret;
  manifest["invariant_violation"] = result.invariant_violation;
  manifest["violation_message"] = result.violation_message;

  atomic_write_file(out_dir / "ledger.csv", ledger_csv(result.ledger));
  atomic_write_file(out_dir / "history.csv", history_csv(result.history));
  atomic_write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  RunSummary summary;
  summary.final_cum_regret =
      result.ledger.rows.empty() ? 0.0 : result.ledger.rows.back().cum_regret;
  summary.invariant_violation = result.invariant_violation;
  summary.violation_message = result.violation_message;
  summary.ledger_path = out_dir / "ledger.csv";
  return summary;
}

// --- ledger parsing and plot data ----------------------------------------------

struct ParsedLedger {
  std::vector<LedgerRow> rows;
};

inline ParsedLedger parse_ledger_csv(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) ||
      line != "episode,v_star,v_star_se,return,v_pi,v_pi_se,inst_regret,cum_regret")
    throw std::runtime_error("malformed ledger (bad header): " + origin);
  ParsedLedger ledger;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8)
      throw std::runtime_error("malformed ledger (line " + std::to_string(lineno) +
                               "): " + origin);
    LedgerRow row;
    try {
      row.episode = std::stoi(cells[0]);
      row.v_star = std::stod(cells[1]);
      row.v_star_se = std::stod(cells[2]);
      row.ret = std::stod(cells[3]);
      row.v_pi = std::stod(cells[4]);
      row.v_pi_se = std::stod(cells[5]);
      row.inst_regret = std::stod(cells[6]);
      row.cum_regret = std::stod(cells[7]);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed ledger (line " + std::to_string(lineno) +
                               "): " + origin);
    }
    ledger.rows.push_back(row);
  }
  return ledger;
}

/// Sorted-linear-interpolation quantile at q * (n - 1).
inline double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::size_t(std::ceil(pos));
  const double frac = pos - double(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

/// Merge ledgers into one long-format CSV (run_id, episode, cum_regret,
/// return, se). With more than one run, also emit per-episode
/// median/quartile columns over the runs that reach each episode.
inline void plotdata_merge(const std::vector<std::filesystem::path>& ledger_paths,
                           const std::filesystem::path& out_path) {
  if (ledger_paths.empty()) throw std::runtime_error("plotdata: need at least one ledger");
  std::vector<ParsedLedger> ledgers;
  for (const auto& path : ledger_paths)
    ledgers.push_back(parse_ledger_csv(read_file(path), path.string()));

  std::ostringstream os;
  os << "run_id,episode,cum_regret,return,se\n";
  for (std::size_t r = 0; r < ledgers.size(); ++r)
    for (const auto& row : ledgers[r].rows)
      os << r << ',' << row.episode << ',' << double_repr(row.cum_regret) << ','
         << double_repr(row.ret) << ',' << double_repr(row.v_pi_se) << '\n';
  atomic_write_file(out_path, os.str());

  if (ledgers.size() > 1) {
    std::size_t max_k = 0;
    for (const auto& l : ledgers) max_k = std::max(max_k, l.rows.size());
    std::ostringstream ss;
    ss << "episode,n_runs,cum_regret_q25,cum_regret_median,cum_regret_q75,"
          "return_q25,return_median,return_q75\n";
    for (std::size_t k = 0; k < max_k; ++k) {
      std::vector<double> cum, ret;
      for (const auto& l : ledgers)
        if (k < l.rows.size()) {
          cum.push_back(l.rows[k].cum_regret);
          ret.push_back(l.rows[k].ret);
        }
      ss << (k + 1) << ',' << cum.size() << ',' << double_repr(quantile(cum, 0.25)) << ','
         << double_repr(quantile(cum, 0.5)) << ',' << double_repr(quantile(cum, 0.75)) << ','
         << double_repr(quantile(ret, 0.25)) << ',' << double_repr(quantile(ret, 0.5)) << ','
         << double_repr(quantile(ret, 0.75)) << '\n';
    }
    std::filesystem::path summary_path = out_path;
    summary_path.replace_filename(out_path.stem().string() + "_summary" +
                                  out_path.extension().string());
    atomic_write_file(summary_path, ss.str());
  }
}

}  // namespace rffrl
