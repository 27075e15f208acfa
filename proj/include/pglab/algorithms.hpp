#ifndef PGLAB_ALGORITHMS_HPP_
#define PGLAB_ALGORITHMS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pglab/diffcore.hpp"
#include "pglab/envs.hpp"
#include "pglab/policy.hpp"
#include "pglab/returns.hpp"
#include "pglab/rng.hpp"
#include "pglab/trajectory.hpp"

namespace pglab {

enum class Algo { kPpo, kRpg };

inline std::string_view algo_name(Algo a) { return a == Algo::kPpo ? "ppo" : "rpg"; }

inline Algo parse_algo(std::string_view id) {
  if (id == "ppo") return Algo::kPpo;
  if (id == "rpg") return Algo::kRpg;
  throw std::invalid_argument("unknown algorithm: " + std::string(id));
}

inline std::string_view reward_mode_name(RewardMode m) {
  return m == RewardMode::kTrueAnalytic ? "true" : "learned";
}

inline RewardMode parse_reward_mode(std::string_view id) {
  if (id == "true") return RewardMode::kTrueAnalytic;
  if (id == "learned") return RewardMode::kLearnedNetwork;
  throw std::invalid_argument("unknown reward mode: " + std::string(id));
}

struct TrainConfig {
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  double reward_lr = 1e-3;
  std::vector<std::size_t> hidden{64, 64};
  std::string policy_arch = "mlp";  // or "linear"
  std::size_t steps_per_iter = 2048;
  std::size_t epochs = 10;
  std::size_t minibatch = 64;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double target_kl = 0.01;
  double obs_clip = 10.0;
  double grad_clip = 2.0;
  bool paper_literal_clip = false;
  bool use_value_function = true;
  double init_log_std = 0.0;
  double policy_output_gain = 0.01;
  std::size_t total_steps = 100000;
  std::size_t eval_every = 1;  // iterations
  std::size_t eval_episodes = 10;
  bool record_wallclock = false;

  void validate() const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0.0)) throw std::invalid_argument(std::string("config: ") + name + " must be > 0");
    };
    positive(policy_lr, "policy_lr");
    positive(value_lr, "value_lr");
    positive(reward_lr, "reward_lr");
    positive(target_kl, "target_kl");
    positive(obs_clip, "obs_clip");
    positive(grad_clip, "grad_clip");
    if (steps_per_iter == 0 || epochs == 0 || minibatch == 0 || eval_every == 0 || eval_episodes == 0) {
      throw std::invalid_argument("config: counts must be >= 1");
    }
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("config: clip_eps in (0,1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("config: gamma in [0,1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("config: lambda in [0,1]");
    if (policy_arch != "mlp" && policy_arch != "linear") {
      throw std::invalid_argument("config: policy_arch must be mlp or linear");
    }
    for (auto h : hidden) {
      if (h == 0) throw std::invalid_argument("config: hidden widths must be >= 1");
    }
  }
};

// Table defaults with the per-task overrides.
inline TrainConfig default_train_config(std::string_view env_id) {
  TrainConfig c;
  if (env_id == "peaks" || env_id == "holes") {
    c.grad_clip = 1.0;
    c.use_value_function = false;
    c.init_log_std = std::log(0.69);
    c.total_steps = 102400;
    c.eval_episodes = 1000;
  } else if (env_id == "mountain") {
    c.epochs = 1;
    c.steps_per_iter = 40;
    c.minibatch = 40;
    c.grad_clip = 0.5;
    c.total_steps = 80000;
    c.init_log_std = -0.5;
    c.eval_every = 25;
    c.eval_episodes = 20;
  }
  return c;
}

// rho-hat: the importance ratio, zeroed where the clipped surrogate is flat.
inline double modified_ratio(double adv, double rho, double eps, bool paper_literal = false) {
  if (!(rho > 0.0)) throw std::domain_error("modified_ratio: rho must be > 0");
  if (adv > 0.0 && rho > 1.0 + eps) return 0.0;
  if (adv < 0.0 && rho < (paper_literal ? 1.0 + eps : 1.0 - eps)) return 0.0;
  return rho;
}

// Global-norm clipping.
inline ParamVector clip_gradient(ParamVector g, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradient: max_norm must be > 0");
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
  return g;
}

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Mean squared error of a scalar-output network and its parameter gradient.
inline LossGrad mse_loss(const Approximator& net, std::span<const Vector> inputs,
                         std::span<const double> targets) {
  require_dim(targets.size(), inputs.size(), "mse_loss targets");
  if (inputs.empty()) throw std::invalid_argument("mse_loss: empty batch");
  require_dim(net.output_size(), 1, "mse_loss network output");
  const double m = static_cast<double>(inputs.size());
  const BatchTape tape = forward_batch(net, columns(inputs, net.input_size()));
  Matrix cot(1, tape.input.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < cot.cols(); ++j) {
    const double err = tape.output()(0, j) - targets[static_cast<std::size_t>(j)];
    loss += err * err;
    cot(0, j) = 2.0 * err / m;
  }
  return {loss / m, backward_batch(net, tape, cot).params};
}

inline LossGrad value_regression_loss(const Approximator& v, std::span<const Vector> states,
                                      std::span<const double> returns) {
  return mse_loss(v, states, returns);
}

inline LossGrad reward_regression_loss(const Approximator& r, std::span<const Vector> states,
                                       std::span<const Vector> actions,
                                       std::span<const double> rewards) {
  require_dim(actions.size(), states.size(), "reward_regression_loss actions");
  std::vector<Vector> inputs(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) inputs[i] = RewardOracle::concat(states[i], actions[i]);
  return mse_loss(r, inputs, rewards);
}

// Flattened iteration batch with the per-step quantities both loops need.
struct ProcessedBatch {
  std::vector<Transition> steps;
  Vector returns;      // G_t
  Vector values;       // v(S_t)
  Vector gae;          // H_t
  Vector lambda_ret;   // G^lambda_t
  Vector next_lambda;  // G^lambda_{t+1}; v(S_T) at a truncation, 0 at termination
  Vector adv;          // normalized H_t
  Vector old_logp;
  std::size_t episodes = 0;
  double mean_return = 0.0;  // undiscounted, per episode
};

template <typename ValueFn>
ProcessedBatch process_batch(std::vector<Trajectory> trajs, const GaussianPolicy& pi,
                             ValueFn&& value, double gamma, double lambda) {
  ProcessedBatch b;
  b.episodes = trajs.size();
  double total = 0.0;
  for (auto& traj : trajs) {
    const std::size_t T = traj.size();
    Vector r(T), v(T + 1);
    for (std::size_t t = 0; t < T; ++t) {
      r[t] = traj.steps[t].r;
      v[t] = value(traj.steps[t].s);
    }
    v[T] = traj.steps.back().terminal ? 0.0 : value(traj.steps.back().s_next);
    const Vector g = compute_returns(r, gamma, v[T]);
    const Vector h = compute_gae(r, v, gamma, lambda);
    const Vector gl = lambda_return(h, v);
    for (std::size_t t = 0; t < T; ++t) {
      b.returns.push_back(g[t]);
      b.values.push_back(v[t]);
      b.gae.push_back(h[t]);
      b.lambda_ret.push_back(gl[t]);
      b.next_lambda.push_back(t + 1 < T ? gl[t + 1] : v[T]);
      b.old_logp.push_back(log_prob(pi, traj.steps[t].s, traj.steps[t].a));
      total += r[t];
      b.steps.push_back(std::move(traj.steps[t]));
    }
  }
  b.mean_return = b.episodes ? total / static_cast<double>(b.episodes) : 0.0;
  b.adv = b.steps.size() >= 2 ? normalize_advantages(b.gae) : Vector(b.steps.size(), 0.0);
  return b;
}

struct Agent {
  GaussianPolicy policy;
  Approximator value;
  Approximator reward;
  AdamState policy_opt;
  AdamState value_opt;
  AdamState reward_opt;
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  Rng rng;
};

inline Agent make_agent(const EnvSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  Rng init = Rng::for_stream(seed, 1);
  Agent a;
  const auto sd = spec.state_dim, ad = spec.action_dim;
  const Architecture arch = cfg.policy_arch == "linear" ? Architecture::linear(sd, ad)
                                                       : Architecture::mlp(sd, cfg.hidden, ad);
  a.policy = GaussianPolicy(Approximator::initialized(arch, init, cfg.policy_output_gain),
                            Vector(ad, cfg.init_log_std), true);
  a.value = Approximator::initialized(Architecture::mlp(sd, cfg.hidden, 1), init);
  a.reward = Approximator::initialized(Architecture::mlp(sd + ad, cfg.hidden, 1), init);
  a.policy_opt = AdamState(a.policy.param_count(), {cfg.policy_lr});
  a.value_opt = AdamState(a.value.param_count(), {cfg.value_lr});
  a.reward_opt = AdamState(a.reward.param_count(), {cfg.reward_lr});
  a.rng = Rng::for_stream(seed, 2);
  return a;
}

struct MetricsRow {
  std::size_t iter = 0;
  std::size_t env_steps = 0;
  double mean_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double reward_loss = 0.0;
  double kl = 0.0;
  double clip_frac = 0.0;
  double grad_norm = 0.0;
  double wallclock_s = 0.0;
};

inline const char* kMetricsCsvHeader =
    "iter,env_steps,mean_return,policy_loss,value_loss,reward_loss,kl,clip_frac,grad_norm,wallclock_s";

// Per-sample RPG policy-gradient term with rho-hat = 1:
// reparam_vjp(grad_a r(s, f(eps; s))) + coef * score(s, a).
inline ParamVector rpg_sample_gradient(const GaussianPolicy& pi, const RewardOracle& r,
                                       const Transition& tr, double coef) {
  const Vector a_re = reparam_forward(pi, tr.s, tr.eps);
  ParamVector g = reparam_param_vjp(pi, tr.s, tr.eps, r.grad(tr.s, a_re));
  if (coef != 0.0) g.axpy(coef, score(pi, tr.s, tr.a));
  return g;
}

namespace detail {

inline void check_loss(double x, const char* what, std::size_t iter) {
  if (std::isfinite(x)) return;
  std::ostringstream os;
  os << "training: non-finite " << what << " at iteration " << iter;
  throw std::runtime_error(os.str());
}

inline MetricsRow run_iteration(Agent& ag, const Env& env, const TrainConfig& cfg, Algo algo,
                                RewardMode mode) {
  const auto t0 = std::chrono::steady_clock::now();
  const EnvSpec spec = env.spec();
  const std::size_t n_episodes = std::max<std::size_t>(1, cfg.steps_per_iter / spec.horizon);
  auto value_of = [&](std::span<const double> s) {
    return cfg.use_value_function ? forward(ag.value, s)[0] : 0.0;
  };
  ProcessedBatch b = process_batch(rollout(env, ag.policy, n_episodes, ag.rng, cfg.obs_clip),
                                   ag.policy, value_of, cfg.gamma, cfg.lambda);
  const std::size_t N = b.steps.size();
  ag.env_steps += N;
  ++ag.iteration;

  const RewardOracle true_reward = RewardOracle::analytic(env);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  MetricsRow row;
  row.iter = ag.iteration;
  row.env_steps = ag.env_steps;
  row.mean_return = b.mean_return;
  bool policy_active = true;
  std::size_t policy_updates = 0, value_updates = 0, reward_updates = 0;
  std::size_t clipped = 0, ratio_count = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), ag.rng.engine());
    for (std::size_t start = 0; start < N; start += cfg.minibatch) {
      const std::size_t end = std::min(N, start + cfg.minibatch);
      const std::span<const std::size_t> mb(order.data() + start, end - start);
      const double m = static_cast<double>(mb.size());

      std::vector<Vector> states(mb.size()), actions(mb.size());
      Vector targets(mb.size()), rewards(mb.size());
      for (std::size_t k = 0; k < mb.size(); ++k) {
        const Transition& tr = b.steps[mb[k]];
        states[k] = tr.s;
        actions[k] = tr.a;
        targets[k] = b.returns[mb[k]];
        rewards[k] = tr.r;
      }

      if (policy_active) {
        const BatchTape tape = forward_batch(ag.policy.mean_net(), columns(states, spec.state_dim));
        const Matrix A = columns(actions, spec.action_dim);
        Vector new_logp(mb.size()), old_logp(mb.size());
        for (std::size_t k = 0; k < mb.size(); ++k) {
          new_logp[k] = log_prob_at_mean(
              ag.policy, std::span<const double>(tape.output().col(k).data(), spec.action_dim), actions[k]);
          old_logp[k] = b.old_logp[mb[k]];
        }
        row.kl = approx_kl(old_logp, new_logp);
        if (row.kl > cfg.target_kl) policy_active = false;

        if (policy_active) {
          Vector rho_hat(mb.size()), coef(mb.size());
          for (std::size_t k = 0; k < mb.size(); ++k) {
            const std::size_t i = mb[k];
            rho_hat[k] = modified_ratio(b.adv[i], std::exp(new_logp[k] - b.old_logp[i]), cfg.clip_eps,
                                        cfg.paper_literal_clip);
            ++ratio_count;
            if (rho_hat[k] == 0.0) ++clipped;
            coef[k] = algo == Algo::kPpo
                          ? b.adv[i]
                          : cfg.gamma * (b.steps[i].terminal ? 0.0 : b.next_lambda[i]) - b.values[i];
          }
          double surrogate = 0.0;
          Matrix eps(static_cast<Eigen::Index>(spec.action_dim), static_cast<Eigen::Index>(mb.size()));
          for (std::size_t k = 0; k < mb.size(); ++k) {
            for (std::size_t j = 0; j < spec.action_dim; ++j) eps(j, k) = b.steps[mb[k]].eps[j];
          }
          Matrix action_cot;
          if (algo == Algo::kPpo) {
            for (std::size_t k = 0; k < mb.size(); ++k) surrogate += rho_hat[k] * coef[k];
          } else {
            // reparameterized actions under the current policy
            Matrix a_re = tape.output();
            for (Eigen::Index j = 0; j < a_re.rows(); ++j) a_re.row(j) += ag.policy.sigma()[j] * eps.row(j);
            Vector r_re(mb.size());
            if (mode == RewardMode::kLearnedNetwork) {
              Matrix x(static_cast<Eigen::Index>(spec.state_dim + spec.action_dim), a_re.cols());
              x.topRows(static_cast<Eigen::Index>(spec.state_dim)) = columns(states, spec.state_dim);
              x.bottomRows(a_re.rows()) = a_re;
              const BatchTape rt = forward_batch(ag.reward, std::move(x));
              const Matrix ones = Matrix::Ones(1, a_re.cols());
              action_cot = backward_batch(ag.reward, rt, ones).input.bottomRows(a_re.rows());
              for (std::size_t k = 0; k < mb.size(); ++k) r_re[k] = rt.output()(0, k);
            } else {
              action_cot.resize(a_re.rows(), a_re.cols());
              for (std::size_t k = 0; k < mb.size(); ++k) {
                const Vector ak(a_re.col(k).data(), a_re.col(k).data() + a_re.rows());
                const Vector gk = true_reward.grad(states[k], ak);
                for (std::size_t j = 0; j < gk.size(); ++j) action_cot(j, k) = gk[j];
                r_re[k] = true_reward.reward(states[k], ak);
              }
            }
            for (std::size_t k = 0; k < mb.size(); ++k) {
              surrogate += rho_hat[k] * (r_re[k] + coef[k] * new_logp[k]);
            }
          }
          ParamVector grad = fused_policy_vjp_batch(ag.policy, tape, A, eps, rho_hat, coef, action_cot);
          grad *= -1.0 / m;  // descent on the negated objective
          row.policy_loss -= surrogate / m;
          check_loss(row.policy_loss, "policy loss", ag.iteration);
          row.grad_norm += grad.norm();
          ParamVector theta = ag.policy.params();
          adam_step(theta, clip_gradient(std::move(grad), cfg.grad_clip), ag.policy_opt);
          ag.policy.set_params(theta);
          ++policy_updates;
        }
      }

      if (cfg.use_value_function) {
        LossGrad lg = value_regression_loss(ag.value, states, targets);
        check_loss(lg.loss, "value loss", ag.iteration);
        row.value_loss += lg.loss;
        adam_step(ag.value, clip_gradient(std::move(lg.grad), cfg.grad_clip), ag.value_opt);
        ++value_updates;
      }
      if (algo == Algo::kRpg && mode == RewardMode::kLearnedNetwork) {
        LossGrad lg = reward_regression_loss(ag.reward, states, actions, rewards);
        check_loss(lg.loss, "reward loss", ag.iteration);
        row.reward_loss += lg.loss;
        adam_step(ag.reward, clip_gradient(std::move(lg.grad), cfg.grad_clip), ag.reward_opt);
        ++reward_updates;
      }
    }
  }
  auto mean = [](double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; };
  row.policy_loss = mean(row.policy_loss, policy_updates);
  row.grad_norm = mean(row.grad_norm, policy_updates);
  row.value_loss = mean(row.value_loss, value_updates);
  row.reward_loss = mean(row.reward_loss, reward_updates);
  row.clip_frac = mean(static_cast<double>(clipped), ratio_count);
  if (cfg.record_wallclock) {
    row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return row;
}

}  // namespace detail

inline MetricsRow ppo_iteration(Agent& agent, const Env& env, const TrainConfig& cfg) {
  return detail::run_iteration(agent, env, cfg, Algo::kPpo, RewardMode::kTrueAnalytic);
}

inline MetricsRow rpg_iteration(Agent& agent, const Env& env, RewardMode mode,
                                const TrainConfig& cfg) {
  return detail::run_iteration(agent, env, cfg, Algo::kRpg, mode);
}

struct EvalRow {
  std::size_t iter = 0;
  std::size_t env_steps = 0;
  double eval_return = 0.0;
};

inline const char* kEvalCsvHeader = "iter,env_steps,eval_return";

// Mean undiscounted return of fresh episodes under the current policy.
// The stream depends only on (seed, iteration), so competing agents are
// evaluated on common noise.
inline double evaluate(const Env& env, const GaussianPolicy& pi, const TrainConfig& cfg,
                       std::uint64_t seed, std::size_t iter) {
  Rng rng = Rng::for_stream(stream_seed(seed, 0xE7A1), iter);
  const auto trajs = rollout(env, pi, cfg.eval_episodes, rng, cfg.obs_clip);
  double total = 0.0;
  for (const auto& t : trajs) total += t.total_reward();
  return total / static_cast<double>(trajs.size());
}

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<EvalRow> evals;
};

// Full run: floor(total_steps / steps_per_iter) iterations, evaluated before
// training, every eval_every iterations and after the last one.
inline TrainResult train(const Env& env, const TrainConfig& cfg, Algo algo, RewardMode mode,
                         std::uint64_t seed) {
  cfg.validate();
  Agent agent = make_agent(env.spec(), cfg, seed);
  TrainResult out;
  const std::size_t iters = cfg.total_steps / cfg.steps_per_iter;
  if (iters == 0) return out;
  out.evals.push_back({0, 0, evaluate(env, agent.policy, cfg, seed, 0)});
  for (std::size_t k = 1; k <= iters; ++k) {
    out.metrics.push_back(algo == Algo::kPpo ? ppo_iteration(agent, env, cfg)
                                             : rpg_iteration(agent, env, mode, cfg));
    if (k % cfg.eval_every == 0 || k == iters) {
      out.evals.push_back({k, agent.env_steps, evaluate(env, agent.policy, cfg, seed, k)});
    }
  }
  return out;
}

}  // namespace pglab

#endif  // PGLAB_ALGORITHMS_HPP_
