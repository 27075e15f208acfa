#ifndef PGLAB_RUNNER_HPP_
#define PGLAB_RUNNER_HPP_

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pglab/algorithms.hpp"
#include "pglab/analysis.hpp"
#include "pglab/bandit_oracle.hpp"
#include "pglab/config.hpp"
#include "pglab/estimators.hpp"
#include "pglab/gradcheck.hpp"
#include "pglab/io.hpp"
#include "pglab/lqg_oracle.hpp"
#include "pglab/parallel.hpp"

namespace pglab {

namespace fs = std::filesystem;

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string s = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iter) + "," + std::to_string(r.env_steps) + "," +
         format_double(r.mean_return) + "," + format_double(r.policy_loss) + "," +
         format_double(r.value_loss) + "," + format_double(r.reward_loss) + "," +
         format_double(r.kl) + "," + format_double(r.clip_frac) + "," +
         format_double(r.grad_norm) + "," + format_double(r.wallclock_s) + "\n";
  }
  return s;
}

inline std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string s = std::string(kEvalCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iter) + "," + std::to_string(r.env_steps) + "," +
         format_double(r.eval_return) + "\n";
  }
  return s;
}

inline std::string bias_variance_csv(const std::vector<BiasVarianceRow>& rows) {
  std::string s = std::string(kBiasVarianceCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += r.estimator + "," + std::to_string(r.n_samples) + "," + format_double(r.bias2) + "," +
         format_double(r.bias2_ci.lo) + "," + format_double(r.bias2_ci.hi) + "," +
         format_double(r.variance) + "," + format_double(r.var_ci.lo) + "," +
         format_double(r.var_ci.hi) + "," + format_double(r.mse) + "," +
         format_double(r.mse_ci.lo) + "," + format_double(r.mse_ci.hi) + "," +
         std::to_string(r.M) + "," + std::to_string(r.seed) + "\n";
  }
  return s;
}

// Seed-averaged evaluation curve: mean and standard error at each point.
struct SummaryRow {
  std::size_t iter = 0;
  std::size_t env_steps = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_seeds = 0;
};

inline const char* kSummaryCsvHeader = "iter,env_steps,mean_return,std_error,n_seeds";

inline std::vector<SummaryRow> summarize(const std::vector<std::vector<EvalRow>>& runs) {
  std::vector<SummaryRow> out;
  if (runs.empty()) return out;
  for (std::size_t k = 0; k < runs.front().size(); ++k) {
    SummaryRow row{runs.front()[k].iter, runs.front()[k].env_steps, 0.0, 0.0, runs.size()};
    for (const auto& r : runs) {
      if (r.size() != runs.front().size() || r[k].iter != row.iter) {
        throw std::runtime_error("summarize: runs have different evaluation points");
      }
      row.mean += r[k].eval_return;
    }
    const double n = static_cast<double>(runs.size());
    row.mean /= n;
    if (runs.size() > 1) {
      double ss = 0.0;
      for (const auto& r : runs) ss += (r[k].eval_return - row.mean) * (r[k].eval_return - row.mean);
      row.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    out.push_back(row);
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iter) + "," + std::to_string(r.env_steps) + "," + format_double(r.mean) +
         "," + format_double(r.std_error) + "," + std::to_string(r.n_seeds) + "\n";
  }
  return s;
}

// Environment samples at the first point where the curve reaches threshold.
inline std::optional<std::size_t> first_crossing(const std::vector<SummaryRow>& curve, double threshold) {
  for (const auto& r : curve) {
    if (r.mean >= threshold) return r.env_steps;
  }
  return std::nullopt;
}

inline int cmd_gradcheck(std::ostream& os, std::size_t cases = 100, std::uint64_t seed = 0) {
  return report_gradchecks(run_gradchecks(default_gradchecks(), cases, seed), os) ? 0 : 1;
}

inline EnvOptions env_options(const ExperimentConfig& c) {
  EnvOptions o;
  o.b_sq = c.b_sq;
  return o;
}

struct BiasVarianceSetup {
  EstimationProblem problem;
  Vector truth;
};

inline BiasVarianceSetup bias_variance_setup(const ExperimentConfig& c) {
  const Env env = make_env(c.env, env_options(c));
  if (const auto* lqg = env.get_if<LqgEnv>()) {
    const Theta theta{c.theta[0], c.theta[1]};
    const auto mode = c.value_oracle == "exact" ? LqgValueMode::kExact : LqgValueMode::kRiccati;
    const Theta g = true_gradient(theta, lqg->params());
    return {lqg_problem(theta, lqg->params(), mode), {g[0], g[1]}};
  }
  if (const auto* bandit = env.get_if<BanditEnv>()) {
    return {bandit_problem(*bandit, c.bandit_mu, c.bandit_sigma),
            bandit_true_gradient(*bandit, c.bandit_mu, c.bandit_sigma).values()};
  }
  throw std::invalid_argument("bias-variance: env must be lqg, peaks or holes");
}

inline std::vector<BiasVarianceRow> cmd_bias_variance(const ExperimentConfig& c, std::ostream& log) {
  const BiasVarianceSetup setup = bias_variance_setup(c);
  BiasVarianceConfig bv{c.n_list, c.M, c.B, c.level, c.seed};
  std::vector<BiasVarianceRow> rows;
  for (const auto& id : c.estimators) {
    auto part = bias_variance_mse(parse_estimator(id), setup.problem, setup.truth, bv);
    for (const auto& r : part) {
      log << id << " n=" << r.n_samples << " bias2=" << r.bias2 << " var=" << r.variance
          << " mse=" << r.mse << '\n';
    }
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const fs::path out(c.out);
  write_file(out / "bias_variance.csv", bias_variance_csv(rows));
  write_file(out / "config.toml", serialize_config(c));
  nlohmann::ordered_json j;
  j["config"] = serialize_config(c);
  j["config_hash"] = config_hash(c);
  j["seed"] = c.seed;
  j["ground_truth"] = setup.truth;
  write_file(out / "bias_variance.json", j.dump(2) + "\n");
  return rows;
}

struct TrainOutput {
  std::vector<TrainResult> runs;  // one per seed, in seed order
  std::vector<SummaryRow> summary;
};

inline TrainOutput cmd_train(const ExperimentConfig& c, std::ostream& log) {
  const Env env = make_env(c.env, env_options(c));
  const Algo algo = parse_algo(c.algo);
  const RewardMode mode = parse_reward_mode(c.reward_mode);
  const auto seeds = c.run_seeds();
  TrainOutput out;
  out.runs.resize(seeds.size());
  const fs::path dir(c.out);
  parallel_for(seeds.size(), [&](std::size_t i) {
    out.runs[i] = train(env, c.train, algo, mode, seeds[i]);
    const fs::path run = dir / ("seed_" + std::to_string(seeds[i]));
    write_file(run / "metrics.csv", metrics_csv(out.runs[i].metrics));
    write_file(run / "eval.csv", eval_csv(out.runs[i].evals));
  });
  std::vector<std::vector<EvalRow>> evals;
  for (const auto& r : out.runs) evals.push_back(r.evals);
  out.summary = summarize(evals);
  write_file(dir / "summary.csv", summary_csv(out.summary));
  write_file(dir / "config.toml", serialize_config(c));
  if (!out.summary.empty()) {
    const auto& last = out.summary.back();
    log << c.env << " " << c.algo << (algo == Algo::kRpg ? "/" + c.reward_mode : "")
        << " seeds=" << seeds.size() << " final=" << last.mean << " +- " << last.std_error << '\n';
  }
  return out;
}

struct SweepCell {
  std::string name;
  ExperimentConfig config;
};

inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& c) {
  if (c.sweep_algos.empty()) throw std::invalid_argument("sweep: empty grid (sweep_algos)");
  std::vector<std::optional<double>> b_values;
  if (c.sweep_b_sq.empty()) {
    b_values.push_back(std::nullopt);
  } else {
    if (c.env != "peaks" && c.env != "holes") throw std::invalid_argument("sweep: sweep_b_sq needs a bandit env");
    for (double b : c.sweep_b_sq) b_values.push_back(b);
  }
  std::vector<SweepCell> cells;
  for (const auto& b : b_values) {
    for (const auto& a : c.sweep_algos) {
      std::vector<std::string> modes{c.reward_mode};
      if (a == "rpg") modes = c.sweep_reward_modes;
      if (modes.empty()) throw std::invalid_argument("sweep: empty grid (sweep_reward_modes)");
      for (const auto& m : modes) {
        SweepCell cell;
        cell.config = c;
        cell.config.algo = a;
        cell.config.reward_mode = m;
        std::string name = a == "rpg" ? "rpg-" + m : a;
        if (b) {
          cell.config.b_sq = *b;
          name = "b_sq=" + format_double(*b) + "/" + name;
        }
        cell.config.sweep_b_sq.clear();
        cell.config.sweep_algos.clear();
        cell.config.out = (fs::path(c.out) / name).string();
        cell.name = name;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

// Runs every grid cell not already marked complete in out/manifest.json.
inline nlohmann::ordered_json cmd_sweep(const ExperimentConfig& c, std::ostream& log) {
  const auto cells = sweep_cells(c);
  const fs::path manifest_path = fs::path(c.out) / "manifest.json";
  nlohmann::ordered_json done = nlohmann::ordered_json::object();
  if (fs::exists(manifest_path)) {
    const auto old = nlohmann::ordered_json::parse(read_file(manifest_path));
    for (const auto& cell : old.at("cells")) {
      if (cell.value("status", "") == "complete") done[cell.at("name").get<std::string>()] = cell;
    }
  }
  nlohmann::ordered_json manifest;
  manifest["config_hash"] = config_hash(c);
  manifest["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : cells) {
    nlohmann::ordered_json entry;
    entry["name"] = cell.name;
    entry["dir"] = cell.config.out;
    entry["env"] = cell.config.env;
    entry["b_sq"] = cell.config.b_sq;
    entry["algo"] = cell.config.algo;
    entry["reward_mode"] = cell.config.reward_mode;
    entry["seeds"] = cell.config.run_seeds();
    entry["config_hash"] = config_hash(cell.config);
    entry["status"] = "pending";
    manifest["cells"].push_back(entry);
  }
  write_file(manifest_path, manifest.dump(2) + "\n");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& entry = manifest["cells"][i];
    const auto it = done.find(cells[i].name);
    if (it != done.end() && it->at("config_hash") == entry["config_hash"] &&
        it->at("seeds") == entry["seeds"]) {
      log << "skip " << cells[i].name << " (complete)\n";
      entry["status"] = "complete";
      continue;
    }
    cmd_train(cells[i].config, log);
    entry["status"] = "complete";
    write_file(manifest_path, manifest.dump(2) + "\n");
  }
  write_file(manifest_path, manifest.dump(2) + "\n");
  write_file(fs::path(c.out) / "config.toml", serialize_config(c));
  return manifest;
}

}  // namespace pglab

#endif  // PGLAB_RUNNER_HPP_
