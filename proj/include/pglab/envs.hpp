#ifndef PGLAB_ENVS_HPP_
#define PGLAB_ENVS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "pglab/diffcore.hpp"
#include "pglab/policy.hpp"
#include "pglab/rng.hpp"
#include "pglab/trajectory.hpp"

namespace pglab {

struct EnvSpec {
  std::string id;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t horizon = 1;
  double gamma = 0.99;
  // Episodes end by horizon truncation (bootstrap the final state) rather
  // than by termination.
  bool truncates = true;
};

struct StepResult {
  Vector s_next;
  double r = 0.0;
};

// Linear dynamics s' = A s + B a, reward -s'Qs - a'Za. Policy noise Sigma is
// carried here so the LQG policy and value oracle read one parameter set.
struct LqgParams {
  Eigen::Matrix2d A = Eigen::Vector2d(0.01, 0.01).asDiagonal();
  Eigen::Matrix2d B = Eigen::Vector2d(1e-4, 1e-4).asDiagonal();
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Z = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Sigma = Eigen::Vector2d(0.1, 0.1).asDiagonal();
  Eigen::Vector2d s0{0.5, 0.5};
  double gamma = 0.99;
  std::size_t horizon = 100;
};

inline Eigen::Map<const Eigen::Vector2d> as_vec2(std::span<const double> v) {
  require_dim(v.size(), 2, "2-vector");
  return Eigen::Map<const Eigen::Vector2d>(v.data());
}

inline Vector to_vector(const Eigen::Vector2d& v) { return {v[0], v[1]}; }

class LqgEnv {
 public:
  explicit LqgEnv(LqgParams params = {}) : p_(std::move(params)) {
    auto check = [](const Eigen::Matrix2d& m, const char* name) {
      if (m(0, 1) != 0.0 || m(1, 0) != 0.0) {
        throw std::invalid_argument(std::string("lqg: matrix ") + name + " must be diagonal");
      }
    };
    check(p_.A, "A");
    check(p_.B, "B");
    check(p_.Q, "Q");
    check(p_.Z, "Z");
    check(p_.Sigma, "Sigma");
    if (p_.horizon < 1) throw std::invalid_argument("lqg: horizon must be >= 1");
    if (!(p_.gamma >= 0.0 && p_.gamma < 1.0)) throw std::invalid_argument("lqg: gamma in [0,1)");
  }

  EnvSpec spec() const { return {"lqg", 2, 2, p_.horizon, p_.gamma, true}; }
  const LqgParams& params() const { return p_; }

  Vector reset(Rng&) const { return to_vector(p_.s0); }

  Eigen::Vector2d next_state(std::span<const double> s, std::span<const double> a) const {
    return p_.A * as_vec2(s) + p_.B * as_vec2(a);
  }

  StepResult step(std::span<const double> s, std::span<const double> a, Rng&) const {
    return {to_vector(next_state(s, a)), reward(s, a)};
  }

  double reward(std::span<const double> s, std::span<const double> a) const {
    auto sv = as_vec2(s);
    auto av = as_vec2(a);
    return -sv.dot(p_.Q * sv) - av.dot(p_.Z * av);
  }

  Vector reward_grad(std::span<const double>, std::span<const double> a) const {
    auto av = as_vec2(a);
    return to_vector(-(p_.Z + p_.Z.transpose()) * av);
  }

 private:
  LqgParams p_;
};

enum class BanditKind { kPeaks, kHoles };

// Single-step continuous bandit on a dummy scalar state 0.
class BanditEnv {
 public:
  BanditEnv(BanditKind kind, double b_sq, double noise_std = 0.01)
      : kind_(kind), b_sq_(b_sq), noise_std_(noise_std) {
    if (!(b_sq > 0.0)) throw std::invalid_argument("bandit: b_sq must be > 0");
  }

  EnvSpec spec() const {
    return {kind_ == BanditKind::kPeaks ? "peaks" : "holes", 1, 1, 1, 0.99, false};
  }
  BanditKind kind() const { return kind_; }
  double b_sq() const { return b_sq_; }
  double noise_std() const { return noise_std_; }

  Vector reset(Rng&) const { return {0.0}; }

  StepResult step(std::span<const double> s, std::span<const double> a, Rng& rng) const {
    return {{0.0}, reward(s, a) + noise_std_ * rng.normal()};
  }

  double reward(std::span<const double>, std::span<const double> a) const {
    require_dim(a.size(), 1, "bandit action");
    const double x = a[0];
    if (kind_ == BanditKind::kPeaks) return std::exp(-(x - 1.0) * (x - 1.0) / b_sq_);
    return 1.0 - std::exp(-x * x / b_sq_);
  }

  Vector reward_grad(std::span<const double>, std::span<const double> a) const {
    require_dim(a.size(), 1, "bandit action");
    const double x = a[0];
    if (kind_ == BanditKind::kPeaks) {
      return {-2.0 * (x - 1.0) / b_sq_ * std::exp(-(x - 1.0) * (x - 1.0) / b_sq_)};
    }
    return {2.0 * x / b_sq_ * std::exp(-x * x / b_sq_)};
  }

 private:
  BanditKind kind_;
  double b_sq_;
  double noise_std_;
};

// S = [-8,8]^2, A = [-1,1]^2, s' = clip(s + clip(a) + U(-0.005, 0.005)),
// r = exp(-|s + clip(a) - nu|^2), nu = (1,-1), 10-step episodes.
class MountainEnv {
 public:
  static constexpr double kStateBound = 8.0;
  static constexpr double kActionBound = 1.0;
  static constexpr double kNoise = 0.005;

  EnvSpec spec() const { return {"mountain", 2, 2, 10, 0.99, true}; }

  Vector reset(Rng&) const { return {0.0, 0.0}; }

  static double clip_action(double a) { return std::clamp(a, -kActionBound, kActionBound); }

  StepResult step(std::span<const double> s, std::span<const double> a, Rng& rng) const {
    require_dim(a.size(), 2, "mountain action");
    StepResult out{Vector(2), reward(s, a)};
    for (std::size_t i = 0; i < 2; ++i) {
      const double x = s[i] + clip_action(a[i]) + rng.uniform(-kNoise, kNoise);
      out.s_next[i] = std::clamp(x, -kStateBound, kStateBound);
    }
    return out;
  }

  double reward(std::span<const double> s, std::span<const double> a) const {
    require_dim(a.size(), 2, "mountain action");
    require_dim(s.size(), 2, "mountain state");
    const double d0 = s[0] + clip_action(a[0]) - 1.0;
    const double d1 = s[1] + clip_action(a[1]) + 1.0;
    return std::exp(-(d0 * d0 + d1 * d1));
  }

  // Saturated action components get zero gradient.
  Vector reward_grad(std::span<const double> s, std::span<const double> a) const {
    const double r = reward(s, a);
    const double nu[2] = {1.0, -1.0};
    Vector g(2);
    for (std::size_t i = 0; i < 2; ++i) {
      const bool saturated = std::abs(a[i]) > kActionBound;
      g[i] = saturated ? 0.0 : -2.0 * (s[i] + clip_action(a[i]) - nu[i]) * r;
    }
    return g;
  }
};

// Value-semantic handle over the closed set of environments.
class Env {
 public:
  using Impl = std::variant<LqgEnv, BanditEnv, MountainEnv>;

  Env(LqgEnv e) : impl_(std::move(e)) {}
  Env(BanditEnv e) : impl_(std::move(e)) {}
  Env(MountainEnv e) : impl_(std::move(e)) {}

  EnvSpec spec() const {
    return std::visit([](const auto& e) { return e.spec(); }, impl_);
  }
  Vector reset(Rng& rng) const {
    return std::visit([&](const auto& e) { return e.reset(rng); }, impl_);
  }
  StepResult step(std::span<const double> s, std::span<const double> a, Rng& rng) const {
    return std::visit([&](const auto& e) { return e.step(s, a, rng); }, impl_);
  }
  double reward(std::span<const double> s, std::span<const double> a) const {
    return std::visit([&](const auto& e) { return e.reward(s, a); }, impl_);
  }
  Vector reward_grad(std::span<const double> s, std::span<const double> a) const {
    return std::visit([&](const auto& e) { return e.reward_grad(s, a); }, impl_);
  }

  const Impl& impl() const { return impl_; }
  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&impl_);
  }

 private:
  Impl impl_;
};

struct EnvOptions {
  double b_sq = 2.0;
  LqgParams lqg;
};

inline Env make_env(std::string_view id, const EnvOptions& opt = {}) {
  if (id == "lqg") return LqgEnv(opt.lqg);
  if (id == "peaks") return BanditEnv(BanditKind::kPeaks, opt.b_sq);
  if (id == "holes") return BanditEnv(BanditKind::kHoles, opt.b_sq);
  if (id == "mountain") return MountainEnv();
  throw std::invalid_argument("unknown env id: " + std::string(id));
}

enum class RewardMode { kTrueAnalytic, kLearnedNetwork };

// Reward function and its action gradient, either the environment's exact
// (noiseless) formula or a learned network r_w(s, a) over concat(s, a).
class RewardOracle {
 public:
  static RewardOracle analytic(Env env) {
    RewardOracle o;
    o.mode_ = RewardMode::kTrueAnalytic;
    o.env_ = std::move(env);
    return o;
  }
  static RewardOracle learned(Approximator net, std::size_t state_dim) {
    require_dim(net.output_size(), 1, "learned reward output");
    RewardOracle o;
    o.mode_ = RewardMode::kLearnedNetwork;
    o.net_ = std::move(net);
    o.state_dim_ = state_dim;
    return o;
  }

  RewardMode mode() const { return mode_; }

  double reward(std::span<const double> s, std::span<const double> a) const {
    if (mode_ == RewardMode::kTrueAnalytic) return env_->reward(s, a);
    return forward(net_, concat(s, a))[0];
  }

  Vector grad(std::span<const double> s, std::span<const double> a) const {
    if (mode_ == RewardMode::kTrueAnalytic) return env_->reward_grad(s, a);
    const double one = 1.0;
    Vector gi = grad_input(net_, concat(s, a), std::span<const double>(&one, 1));
    return Vector(gi.begin() + static_cast<std::ptrdiff_t>(state_dim_), gi.end());
  }

  static Vector concat(std::span<const double> s, std::span<const double> a) {
    Vector x(s.begin(), s.end());
    x.insert(x.end(), a.begin(), a.end());
    return x;
  }

 private:
  RewardMode mode_ = RewardMode::kTrueAnalytic;
  std::optional<Env> env_;
  Approximator net_;
  std::size_t state_dim_ = 0;
};

inline void check_finite_or_throw(std::span<const double> v, const char* what, std::size_t episode,
                                  std::size_t t) {
  if (all_finite(v)) return;
  std::ostringstream os;
  os << "rollout: non-finite " << what << " at episode " << episode << ", step " << t << ": [";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  throw std::runtime_error(os.str());
}

// Runs `n_episodes` fixed-horizon episodes. The policy sees observations
// clipped to +-obs_clip when given; the clipped observation is what is stored.
inline std::vector<Trajectory> rollout(const Env& env, const GaussianPolicy& pi,
                                       std::size_t n_episodes, Rng& rng,
                                       std::optional<double> obs_clip = std::nullopt) {
  const EnvSpec spec = env.spec();
  require_dim(pi.state_dim(), spec.state_dim, "rollout policy state_dim");
  require_dim(pi.action_dim(), spec.action_dim, "rollout policy action_dim");
  auto observe = [&](Vector s) {
    if (obs_clip) {
      for (double& x : s) x = std::clamp(x, -*obs_clip, *obs_clip);
    }
    return s;
  };
  std::vector<Trajectory> out(n_episodes);
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    Trajectory& traj = out[ep];
    traj.steps.reserve(spec.horizon);
    Vector s = observe(env.reset(rng));
    for (std::size_t t = 0; t < spec.horizon; ++t) {
      check_finite_or_throw(s, "state", ep, t);
      ActionSample as = sample(pi, s, rng);
      check_finite_or_throw(as.action, "action", ep, t);
      StepResult sr = env.step(s, as.action, rng);
      Transition tr;
      tr.s = s;
      tr.a = std::move(as.action);
      tr.eps = std::move(as.noise.eps);
      tr.r = sr.r;
      tr.s_next = observe(std::move(sr.s_next));
      const bool last = (t + 1 == spec.horizon);
      tr.terminal = last && !spec.truncates;
      tr.truncated = last && spec.truncates;
      s = tr.s_next;
      traj.steps.push_back(std::move(tr));
    }
  }
  return out;
}

}  // namespace pglab

#endif  // PGLAB_ENVS_HPP_
