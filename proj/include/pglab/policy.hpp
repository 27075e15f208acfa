#ifndef PGLAB_POLICY_HPP_
#define PGLAB_POLICY_HPP_

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <stdexcept>

#include "pglab/diffcore.hpp"
#include "pglab/rng.hpp"
#include "pglab/trajectory.hpp"

namespace pglab {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct NoiseSample {
  Vector eps;
};

struct ActionSample {
  Vector action;
  NoiseSample noise;
};

// Diagonal Gaussian policy a = mu(s) + sigma * eps with a state-independent
// log standard deviation. Parameters are laid out as [mean params, log_std]
// (log_std omitted when it is fixed).
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Approximator mean, Vector log_std, bool learn_log_std = true)
      : mean_(std::move(mean)), learn_log_std_(learn_log_std) {
    require_dim(log_std.size(), mean_.output_size(), "GaussianPolicy log_std");
    set_log_std(std::move(log_std));
  }

  std::size_t state_dim() const { return mean_.input_size(); }
  std::size_t action_dim() const { return mean_.output_size(); }
  std::size_t param_count() const {
    return mean_.param_count() + (learn_log_std_ ? action_dim() : 0);
  }
  bool learns_log_std() const { return learn_log_std_; }

  const Approximator& mean_net() const { return mean_; }
  const Vector& log_std() const { return log_std_; }
  const Vector& sigma() const { return sigma_; }

  Vector mean(std::span<const double> s) const { return forward(mean_, s); }

  ParamVector params() const {
    Vector v = mean_.params().values();
    if (learn_log_std_) v.insert(v.end(), log_std_.begin(), log_std_.end());
    return ParamVector(std::move(v));
  }

  void set_params(const ParamVector& p) {
    require_dim(p.size(), param_count(), "GaussianPolicy::set_params");
    const std::size_t nm = mean_.param_count();
    mean_.set_params(ParamVector(Vector(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nm))));
    if (learn_log_std_) set_log_std(Vector(p.begin() + static_cast<std::ptrdiff_t>(nm), p.end()));
  }

  void set_log_std(Vector log_std) {
    require_dim(log_std.size(), action_dim(), "GaussianPolicy::set_log_std");
    for (double& l : log_std) {
      if (std::isnan(l)) throw std::invalid_argument("GaussianPolicy: NaN log_std");
      const double c = std::clamp(l, kLogStdMin, kLogStdMax);
      if (c != l) {
        std::clog << "[pglab] log_std " << l << " clamped to " << c << '\n';
        l = c;
      }
    }
    log_std_ = std::move(log_std);
    sigma_.resize(log_std_.size());
    for (std::size_t i = 0; i < log_std_.size(); ++i) sigma_[i] = std::exp(log_std_[i]);
  }

 private:
  Approximator mean_;
  Vector log_std_;
  Vector sigma_;
  bool learn_log_std_ = true;
};

// f(eps; s) = mu(s) + sigma * eps
inline Vector reparam_forward(const GaussianPolicy& pi, std::span<const double> s,
                              std::span<const double> eps) {
  require_dim(eps.size(), pi.action_dim(), "reparam_forward eps");
  Vector a = pi.mean(s);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += pi.sigma()[i] * eps[i];
  return a;
}

inline ActionSample sample(const GaussianPolicy& pi, std::span<const double> s, Rng& rng) {
  ActionSample out;
  out.noise.eps.resize(pi.action_dim());
  for (double& e : out.noise.eps) e = rng.normal();
  out.action = reparam_forward(pi, s, out.noise.eps);
  return out;
}

// g(a; s) = (a - mu(s)) / sigma, the exact inverse of reparam_forward.
inline NoiseSample reparam_inverse(const GaussianPolicy& pi, std::span<const double> s,
                                   std::span<const double> a) {
  require_dim(a.size(), pi.action_dim(), "reparam_inverse action");
  Vector mu = pi.mean(s);
  NoiseSample n{Vector(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(pi.sigma()[i] > 0.0)) throw std::domain_error("reparam_inverse: sigma must be > 0");
    n.eps[i] = (a[i] - mu[i]) / pi.sigma()[i];
  }
  return n;
}

inline double log_prob(const GaussianPolicy& pi, std::span<const double> s,
                       std::span<const double> a) {
  require_dim(a.size(), pi.action_dim(), "log_prob action");
  Vector mu = pi.mean(s);
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mu[i]) / pi.sigma()[i];
    lp += -0.5 * z * z - pi.log_std()[i] - kHalfLog2Pi;
  }
  return lp;
}

// Gradient of log pi(a|s) with respect to the policy parameters.
inline ParamVector score(const GaussianPolicy& pi, std::span<const double> s,
                         std::span<const double> a) {
  require_dim(a.size(), pi.action_dim(), "score action");
  const ForwardTape tape = forward_tape(pi.mean_net(), s);
  const Vector& mu = tape.output();
  const std::size_t d = pi.action_dim();
  Vector cot(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double var = pi.sigma()[i] * pi.sigma()[i];
    cot[i] = (a[i] - mu[i]) / var;
  }
  ParamVector g = backward(pi.mean_net(), tape, cot).params;
  if (!pi.learns_log_std()) return g;
  Vector out = g.values();
  out.reserve(out.size() + d);
  for (std::size_t i = 0; i < d; ++i) {
    const double z = (a[i] - mu[i]) / pi.sigma()[i];
    out.push_back(z * z - 1.0);
  }
  return ParamVector(std::move(out));
}

// (d f(eps; s) / d theta)^T cotangent, i.e. the policy-parameter gradient of
// any scalar function of the action evaluated at a = f(eps; s), given the
// function's action gradient as `cotangent`.
inline ParamVector reparam_param_vjp(const GaussianPolicy& pi, std::span<const double> s,
                                     std::span<const double> eps,
                                     std::span<const double> cotangent) {
  require_dim(eps.size(), pi.action_dim(), "reparam_param_vjp eps");
  require_dim(cotangent.size(), pi.action_dim(), "reparam_param_vjp cotangent");
  ParamVector g = grad_params(pi.mean_net(), s, cotangent);
  if (!pi.learns_log_std()) return g;
  Vector out = g.values();
  for (std::size_t i = 0; i < pi.action_dim(); ++i) {
    out.push_back(cotangent[i] * pi.sigma()[i] * eps[i]);
  }
  return ParamVector(std::move(out));
}

// log pi(a|s) given the mean mu(s) already evaluated.
inline double log_prob_at_mean(const GaussianPolicy& pi, std::span<const double> mu,
                               std::span<const double> a) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mu[i]) / pi.sigma()[i];
    lp += -0.5 * z * z - pi.log_std()[i] - kHalfLog2Pi;
  }
  return lp;
}

// score_weight * score(s, a) + reparam_param_vjp(s, eps, action_cot) from a
// single mean-network tape at s. action_cot may be empty (treated as zero).
inline ParamVector fused_policy_vjp(const GaussianPolicy& pi, const ForwardTape& tape,
                                    std::span<const double> a, std::span<const double> eps,
                                    double score_weight, std::span<const double> action_cot) {
  const std::size_t d = pi.action_dim();
  const Vector& mu = tape.output();
  Vector cot(d), ls(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double sg = pi.sigma()[i];
    const double z = (a[i] - mu[i]) / sg;
    const double c = action_cot.empty() ? 0.0 : action_cot[i];
    cot[i] = score_weight * z / sg + c;
    ls[i] = score_weight * (z * z - 1.0) + c * sg * eps[i];
  }
  ParamVector g = backward(pi.mean_net(), tape, cot).params;
  if (!pi.learns_log_std()) return g;
  Vector out = g.values();
  out.insert(out.end(), ls.begin(), ls.end());
  return ParamVector(std::move(out));
}

// Batched fused_policy_vjp, summed over columns with per-sample weights.
// actions, eps and action_cot are action_dim x batch; action_cot may be empty.
inline ParamVector fused_policy_vjp_batch(const GaussianPolicy& pi, const BatchTape& tape,
                                          const Matrix& actions, const Matrix& eps,
                                          std::span<const double> weight,
                                          std::span<const double> score_weight,
                                          const Matrix& action_cot) {
  const auto d = static_cast<Eigen::Index>(pi.action_dim());
  const Eigen::Index m = actions.cols();
  const Matrix& mu = tape.output();
  Matrix cot(d, m);
  Vector ls(pi.action_dim(), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double sg = pi.sigma()[i];
      const double z = (actions(i, j) - mu(i, j)) / sg;
      const double c = action_cot.size() ? action_cot(i, j) : 0.0;
      cot(i, j) = weight[j] * (score_weight[j] * z / sg + c);
      ls[i] += weight[j] * (score_weight[j] * (z * z - 1.0) + c * sg * eps(i, j));
    }
  }
  ParamVector g = backward_batch(pi.mean_net(), tape, cot).params;
  if (!pi.learns_log_std()) return g;
  Vector out = g.values();
  out.insert(out.end(), ls.begin(), ls.end());
  return ParamVector(std::move(out));
}

inline double approx_kl(std::span<const double> old_logps, std::span<const double> new_logps) {
  require_dim(new_logps.size(), old_logps.size(), "approx_kl");
  if (old_logps.empty()) throw std::invalid_argument("approx_kl: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < old_logps.size(); ++i) acc += old_logps[i] - new_logps[i];
  return acc / static_cast<double>(old_logps.size());
}

// Sample estimate of KL(old || new) from actions drawn under the old policy.
inline double approx_kl(std::span<const double> old_logps, const GaussianPolicy& pi,
                        std::span<const Transition> batch) {
  require_dim(batch.size(), old_logps.size(), "approx_kl batch");
  Vector fresh(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) fresh[i] = log_prob(pi, batch[i].s, batch[i].a);
  return approx_kl(old_logps, fresh);
}

}  // namespace pglab

#endif  // PGLAB_POLICY_HPP_
