// pglab: gradient checks, estimator bias/variance studies and PPO/RPG training.
#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pglab/pglab.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::string env;
  std::string algo;
  std::string reward_mode;
  bool paper_literal_clip = false;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--seeds", f.seeds, "seed range A..B (inclusive)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--env", f.env, "lqg, peaks, holes or mountain");
  app->add_option("--algo", f.algo, "ppo or rpg")->check(CLI::IsMember({"ppo", "rpg"}));
  app->add_option("--reward-mode", f.reward_mode, "true or learned")
      ->check(CLI::IsMember({"true", "learned"}));
  app->add_flag("--paper-literal-clip", f.paper_literal_clip, "use 1+eps in the negative-advantage branch");
  app->add_option("--set", f.set, "override any config key: key=value");
}

pglab::ExperimentConfig resolve(const CommonFlags& f) {
  std::vector<pglab::Assignment> a;
  if (!f.config.empty()) a = pglab::parse_config_text(pglab::read_file(f.config));
  for (const auto& kv : f.set) a.push_back(pglab::parse_assignment(kv));
  if (!f.env.empty()) a.emplace_back("env", f.env);
  if (!f.algo.empty()) a.emplace_back("algo", f.algo);
  if (!f.reward_mode.empty()) a.emplace_back("reward_mode", f.reward_mode);
  if (f.seed) a.emplace_back("seed", std::to_string(*f.seed));
  if (!f.seeds.empty()) a.emplace_back("seeds", f.seeds);
  if (!f.out.empty()) a.emplace_back("out", "\"" + f.out + "\"");
  if (f.paper_literal_clip) a.emplace_back("paper_literal_clip", "true");
  return pglab::resolve_config(a);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pglab: policy-gradient estimators, bias/variance analysis and training"};
  app.require_subcommand(1);

  std::size_t cases = 100;
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of all analytic gradients");
  gradcheck->add_option("--cases", cases, "random cases per check")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc_seed, "seed");

  CommonFlags bv_flags, train_flags, sweep_flags;
  auto* bv = app.add_subcommand("bias-variance", "bias^2 / variance / MSE of gradient estimators");
  add_common(bv, bv_flags);
  auto* train = app.add_subcommand("train", "train PPO or RPG over one or more seeds");
  add_common(train, train_flags);
  auto* sweep = app.add_subcommand("sweep", "grid of training runs with a resumable manifest");
  add_common(sweep, sweep_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gradcheck) return pglab::cmd_gradcheck(std::cout, cases, gc_seed);
    if (*bv) {
      pglab::cmd_bias_variance(resolve(bv_flags), std::cout);
    } else if (*train) {
      pglab::cmd_train(resolve(train_flags), std::cout);
    } else if (*sweep) {
      pglab::cmd_sweep(resolve(sweep_flags), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
