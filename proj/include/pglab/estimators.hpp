#ifndef PGLAB_ESTIMATORS_HPP_
#define PGLAB_ESTIMATORS_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pglab/diffcore.hpp"
#include "pglab/envs.hpp"
#include "pglab/lqg_oracle.hpp"
#include "pglab/policy.hpp"
#include "pglab/trajectory.hpp"

namespace pglab {

enum class EstimatorKind { kPg, kRpg, kRpgBaseline, kRp };

inline std::string_view estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kPg: return "pg";
    case EstimatorKind::kRpg: return "rpg";
    case EstimatorKind::kRpgBaseline: return "rpg-baseline";
    case EstimatorKind::kRp: return "rp";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view id) {
  if (id == "pg") return EstimatorKind::kPg;
  if (id == "rpg") return EstimatorKind::kRpg;
  if (id == "rpg-baseline") return EstimatorKind::kRpgBaseline;
  if (id == "rp") return EstimatorKind::kRp;
  throw std::invalid_argument("unknown estimator id: " + std::string(id));
}

struct GradEstimate {
  ParamVector grad;
  EstimatorKind kind = EstimatorKind::kPg;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

// State value v_t(s). `t` is the time index of the state inside its episode,
// which the finite-horizon LQG value needs.
class ValueOracle {
 public:
  using Fn = std::function<double(std::span<const double>, std::size_t)>;

  ValueOracle() : ValueOracle("none", [](std::span<const double>, std::size_t) { return 0.0; }) {}
  ValueOracle(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  static ValueOracle none() { return {}; }

  // v_t(s) = s'P_t s + c_t.
  static ValueOracle lqg_exact(QuadraticValue v) {
    return {"exact", [v = std::move(v)](std::span<const double> s, std::size_t t) {
              return v.value(t, s);
            }};
  }
  // s'P_t s only; differs from the exact value by the state-independent c_t.
  static ValueOracle lqg_riccati(QuadraticValue v) {
    return {"riccati", [v = std::move(v)](std::span<const double> s, std::size_t t) {
              return v.quadratic_part(t, s);
            }};
  }
  static ValueOracle network(Approximator net) {
    require_dim(net.output_size(), 1, "value network output");
    return {"network", [net = std::move(net)](std::span<const double> s, std::size_t) {
              return forward(net, s)[0];
            }};
  }

  double operator()(std::span<const double> s, std::size_t t) const { return fn_(s, t); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

// Action value q_t(s, a) and its action gradient.
class QOracle {
 public:
  using ValueFn = std::function<double(std::span<const double>, std::span<const double>, std::size_t)>;
  using GradFn = std::function<Vector(std::span<const double>, std::span<const double>, std::size_t)>;

  QOracle(ValueFn value, GradFn grad) : value_(std::move(value)), grad_(std::move(grad)) {}

  // q = r, for single-step tasks.
  static QOracle from_reward(RewardOracle r) {
    return {[r](std::span<const double> s, std::span<const double> a, std::size_t) {
              return r.reward(s, a);
            },
            [r](std::span<const double> s, std::span<const double> a, std::size_t) {
              return r.grad(s, a);
            }};
  }

  // q_t(s,a) = r(s,a) + gamma v_{t+1}(As + Ba); the LQG next state is
  // deterministic given (s, a).
  static QOracle lqg(const LqgEnv& env, QuadraticValue v, bool include_constant = true) {
    auto value = [env, v, include_constant](std::span<const double> s, std::span<const double> a,
                                            std::size_t t) {
      const Vector sn = to_vector(env.next_state(s, a));
      const double vn = include_constant ? v.value(t + 1, sn) : v.quadratic_part(t + 1, sn);
      return env.reward(s, a) + env.params().gamma * vn;
    };
    auto grad = [env, v](std::span<const double> s, std::span<const double> a, std::size_t t) {
      const Eigen::Vector2d sn = env.next_state(s, a);
      const Eigen::Vector2d dv = env.params().B.transpose() * v.grad(t + 1, sn);
      Vector g = env.reward_grad(s, a);
      for (std::size_t i = 0; i < 2; ++i) g[i] += env.params().gamma * dv[i];
      return g;
    };
    return {value, grad};
  }

  double value(std::span<const double> s, std::span<const double> a, std::size_t t) const {
    return value_(s, a, t);
  }
  Vector grad(std::span<const double> s, std::span<const double> a, std::size_t t) const {
    if (!grad_) throw std::logic_error("QOracle: action gradient unavailable");
    return grad_(s, a, t);
  }
  bool has_grad() const { return static_cast<bool>(grad_); }

 private:
  ValueFn value_;
  GradFn grad_;
};

namespace detail {

inline Vector noise_of(const Transition& tr, const GaussianPolicy& pi) {
  if (!tr.eps.empty()) return tr.eps;
  return reparam_inverse(pi, tr.s, tr.a).eps;
}

inline GradEstimate finish(ParamVector acc, std::size_t n, EstimatorKind kind, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("estimator: no trajectories");
  acc *= 1.0 / static_cast<double>(n);
  if (!acc.finite()) throw std::runtime_error("estimator: non-finite gradient");
  return {std::move(acc), kind, n, seed};
}

}  // namespace detail

// Likelihood-ratio estimate: mean over episodes of sum_t gamma^t q(s_t,a_t) score_t.
inline GradEstimate pg_estimate(std::span<const Trajectory> trajs, const QOracle& q,
                                const GaussianPolicy& pi, double gamma, std::uint64_t seed = 0) {
  ParamVector acc(pi.param_count());
  for (const auto& traj : trajs) {
    double disc = 1.0;
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const Transition& tr = traj.steps[t];
      acc.axpy(disc * q.value(tr.s, tr.a, t), score(pi, tr.s, tr.a));
      disc *= gamma;
    }
  }
  return detail::finish(std::move(acc), trajs.size(), EstimatorKind::kPg, seed);
}

namespace detail {

// Shared body of the reward-gradient estimators: the per-step term is
// reparam_vjp(grad_a r) + (gamma v(s') - baseline * v(s)) score.
inline GradEstimate reward_policy_gradient(std::span<const Trajectory> trajs, const ValueOracle& v,
                                           const RewardOracle& r, const GaussianPolicy& pi,
                                           double gamma, bool subtract_baseline,
                                           EstimatorKind kind, std::uint64_t seed) {
  ParamVector acc(pi.param_count());
  for (const auto& traj : trajs) {
    double disc = 1.0;
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const Transition& tr = traj.steps[t];
      const Vector eps = noise_of(tr, pi);
      ParamVector term = reparam_param_vjp(pi, tr.s, eps, r.grad(tr.s, tr.a));
      double coef = tr.terminal ? 0.0 : gamma * v(tr.s_next, t + 1);
      if (subtract_baseline) coef -= v(tr.s, t);
      if (coef != 0.0) term.axpy(coef, score(pi, tr.s, tr.a));
      acc.axpy(disc, term);
      disc *= gamma;
    }
  }
  return finish(std::move(acc), trajs.size(), kind, seed);
}

}  // namespace detail

inline GradEstimate rpg_estimate(std::span<const Trajectory> trajs, const ValueOracle& v,
                                 const RewardOracle& r, const GaussianPolicy& pi, double gamma,
                                 std::uint64_t seed = 0) {
  return detail::reward_policy_gradient(trajs, v, r, pi, gamma, false, EstimatorKind::kRpg, seed);
}

inline GradEstimate rpg_baseline_estimate(std::span<const Trajectory> trajs, const ValueOracle& v,
                                          const RewardOracle& r, const GaussianPolicy& pi,
                                          double gamma, std::uint64_t seed = 0) {
  return detail::reward_policy_gradient(trajs, v, r, pi, gamma, true,
                                        EstimatorKind::kRpgBaseline, seed);
}

// Pathwise estimate through q: mean of sum_t gamma^t reparam_vjp(grad_a q).
inline GradEstimate rp_estimate(std::span<const Trajectory> trajs, const QOracle& q,
                                const GaussianPolicy& pi, double gamma, std::uint64_t seed = 0) {
  if (!q.has_grad()) throw std::invalid_argument("rp_estimate: q gradient unavailable");
  ParamVector acc(pi.param_count());
  for (const auto& traj : trajs) {
    double disc = 1.0;
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const Transition& tr = traj.steps[t];
      const Vector eps = detail::noise_of(tr, pi);
      acc.axpy(disc, reparam_param_vjp(pi, tr.s, eps, q.grad(tr.s, tr.a, t)));
      disc *= gamma;
    }
  }
  return detail::finish(std::move(acc), trajs.size(), EstimatorKind::kRp, seed);
}

// Everything needed to draw fresh estimates of one fixed policy's gradient.
struct EstimationProblem {
  Env env;
  GaussianPolicy policy;
  ValueOracle value;
  QOracle q;
  RewardOracle reward;
  double gamma = 0.99;
};

inline GradEstimate estimate(EstimatorKind kind, std::span<const Trajectory> trajs,
                             const EstimationProblem& p, std::uint64_t seed = 0) {
  switch (kind) {
    case EstimatorKind::kPg: return pg_estimate(trajs, p.q, p.policy, p.gamma, seed);
    case EstimatorKind::kRpg: return rpg_estimate(trajs, p.value, p.reward, p.policy, p.gamma, seed);
    case EstimatorKind::kRpgBaseline:
      return rpg_baseline_estimate(trajs, p.value, p.reward, p.policy, p.gamma, seed);
    case EstimatorKind::kRp: return rp_estimate(trajs, p.q, p.policy, p.gamma, seed);
  }
  throw std::logic_error("estimate: bad kind");
}

// Rolls out `n` fresh episodes and returns one estimate from them.
inline GradEstimate draw_estimate(EstimatorKind kind, const EstimationProblem& p, std::size_t n,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const auto trajs = rollout(p.env, p.policy, n, rng);
  return estimate(kind, trajs, p, seed);
}

enum class LqgValueMode { kRiccati, kExact };

// Fixed-theta LQG estimation problem. In riccati mode the value and q
// oracles omit the noise constant c_t (an unbiased state-independent shift).
inline EstimationProblem lqg_problem(const Theta& theta, const LqgParams& params,
                                     LqgValueMode mode = LqgValueMode::kRiccati) {
  LqgEnv env(params);
  QuadraticValue v = exact_value(theta, params);
  const bool exact = mode == LqgValueMode::kExact;
  return {env,
          lqg_policy(theta, params),
          exact ? ValueOracle::lqg_exact(v) : ValueOracle::lqg_riccati(v),
          QOracle::lqg(env, v, exact),
          RewardOracle::analytic(env),
          params.gamma};
}

// Fixed Gaussian policy N(mu, sigma) on a bandit; value is zero (no next state).
inline EstimationProblem bandit_problem(const BanditEnv& env, double mu, double sigma) {
  Approximator mean(Architecture::linear(1, 1), ParamVector(Vector{0.0, mu}));
  GaussianPolicy pi(std::move(mean), {std::log(sigma)}, true);
  RewardOracle r = RewardOracle::analytic(env);
  return {env, std::move(pi), ValueOracle::none(), QOracle::from_reward(r), r, env.spec().gamma};
}

}  // namespace pglab

#endif  // PGLAB_ESTIMATORS_HPP_
