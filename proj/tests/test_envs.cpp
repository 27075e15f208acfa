#include <gtest/gtest.h>

#include <cmath>

#include "pglab/envs.hpp"

using namespace pglab;

namespace {

GaussianPolicy zero_policy(std::size_t sdim, std::size_t adim, double log_std) {
  return GaussianPolicy(Approximator(Architecture::linear(sdim, adim)), Vector(adim, log_std));
}

void expect_gradient_matches_fd(const Env& env, double s_lo, double s_hi, double a_lo, double a_hi,
                                std::uint64_t seed) {
  const EnvSpec sp = env.spec();
  Rng rng(seed);
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    Vector s(sp.state_dim), a(sp.action_dim);
    for (double& x : s) x = rng.uniform(s_lo, s_hi);
    for (double& x : a) x = rng.uniform(a_lo, a_hi);
    Vector g = env.reward_grad(s, a);
    for (std::size_t j = 0; j < a.size(); ++j) {
      Vector up = a, dn = a;
      up[j] += h;
      dn[j] -= h;
      const double fd = (env.reward(s, up) - env.reward(s, dn)) / (2 * h);
      EXPECT_LT(relative_error(g[j], fd), 1e-6) << sp.id << " point " << i;
    }
  }
}

}  // namespace

TEST(Lqg, Defaults) {
  LqgEnv env;
  EXPECT_EQ(env.spec().horizon, 100u);
  EXPECT_DOUBLE_EQ(env.spec().gamma, 0.99);
  Rng rng(0);
  EXPECT_EQ(env.reset(rng), (Vector{0.5, 0.5}));
}

TEST(Lqg, RewardAndDynamics) {
  LqgEnv env;
  EXPECT_DOUBLE_EQ(env.reward(Vector{0.5, 0.5}, Vector{0, 0}), -0.5);
  EXPECT_EQ(env.reward(Vector{0, 0}, Vector{0, 0}), 0.0);
  Rng rng(0);
  StepResult z = env.step(Vector{0, 0}, Vector{0, 0}, rng);
  EXPECT_EQ(z.s_next, (Vector{0, 0}));
  StepResult one = env.step(Vector{1, 1}, Vector{1, 1}, rng);
  EXPECT_NEAR(one.s_next[0], 0.01 + 1e-4, 1e-16);
  EXPECT_NEAR(one.s_next[1], 0.01 + 1e-4, 1e-16);
}

TEST(Lqg, NonDiagonalRejected) {
  LqgParams p;
  p.A(0, 1) = 0.1;
  EXPECT_THROW(LqgEnv{p}, std::invalid_argument);
}

TEST(Bandit, PeaksAndHoles) {
  BanditEnv peaks(BanditKind::kPeaks, 2.0), holes(BanditKind::kHoles, 2.0);
  const Vector s{0.0};
  EXPECT_EQ(peaks.reward(s, Vector{1.0}), 1.0);
  EXPECT_EQ(peaks.reward_grad(s, Vector{1.0})[0], 0.0);
  EXPECT_EQ(holes.reward(s, Vector{0.0}), 0.0);
  EXPECT_EQ(holes.reward_grad(s, Vector{0.0})[0], 0.0);
  EXPECT_NEAR(peaks.reward(s, Vector{0.0}), 0.6065306597126334, 1e-15);
  EXPECT_NEAR(peaks.reward_grad(s, Vector{0.0})[0], 0.6065306597126334, 1e-15);
  EXPECT_EQ(peaks.spec().horizon, 1u);
}

TEST(Bandit, NonPositiveWidthRejected) {
  EXPECT_THROW(BanditEnv(BanditKind::kPeaks, 0.0), std::invalid_argument);
  EXPECT_THROW(BanditEnv(BanditKind::kHoles, -2.0), std::invalid_argument);
}

TEST(Bandit, RewardNoiseStatistics) {
  BanditEnv env(BanditKind::kPeaks, 8.0);
  Rng rng(42);
  const Vector s{0.0}, a{0.3};
  const double clean = env.reward(s, a);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = env.step(s, a, rng).r - clean;
    sum += e;
    sq += e * e;
  }
  const double m = sum / n;
  const double sd = std::sqrt(sq / n - m * m);
  EXPECT_LT(std::abs(m), 4 * 0.01 / 1000);
  EXPECT_NEAR(sd, 0.01, 0.01 * 0.01);
}

TEST(Mountain, RewardValues) {
  MountainEnv env;
  EXPECT_EQ(env.reward(Vector{0, 0}, Vector{1, -1}), 1.0);
  EXPECT_NEAR(env.reward(Vector{0, 0}, Vector{0, 0}), std::exp(-2.0), 1e-16);
  Vector g = env.reward_grad(Vector{0, 0}, Vector{0, 0});
  EXPECT_NEAR(g[0], 2 * std::exp(-2.0), 1e-16);
  EXPECT_NEAR(g[1], -2 * std::exp(-2.0), 1e-16);
}

TEST(Mountain, ActionClippedInRewardAndDynamics) {
  MountainEnv env;
  EXPECT_EQ(env.reward(Vector{0, 0}, Vector{3, -5}), 1.0);
  Vector g = env.reward_grad(Vector{-0.5, 0}, Vector{3, 0});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NE(g[1], 0.0);
  Rng rng(1);
  StepResult r = env.step(Vector{0, 0}, Vector{4, -4}, rng);
  EXPECT_NEAR(r.s_next[0], 1.0, 0.005);
  EXPECT_NEAR(r.s_next[1], -1.0, 0.005);
}

TEST(Mountain, StatesStayInBox) {
  Env env = MountainEnv();
  GaussianPolicy pi(Approximator(Architecture::linear(2, 2), ParamVector(Vector{0, 0, 0, 0, 1, -1})),
                    Vector{1.0, 1.0});
  Rng rng(7);
  for (const auto& tr : rollout(env, pi, 200, rng)) {
    ASSERT_EQ(tr.size(), 10u);
    for (const auto& st : tr.steps) {
      for (double x : st.s_next) {
        EXPECT_LE(x, 8.0);
        EXPECT_GE(x, -8.0);
      }
    }
  }
}

TEST(RewardGradient, MatchesFiniteDifferences) {
  expect_gradient_matches_fd(make_env("lqg"), -2, 2, -2, 2, 1);
  EnvOptions o;
  for (double b : {2.0, 8.0, 32.0}) {
    o.b_sq = b;
    expect_gradient_matches_fd(make_env("peaks", o), 0, 0, -4, 4, 2);
    expect_gradient_matches_fd(make_env("holes", o), 0, 0, -4, 4, 3);
  }
  expect_gradient_matches_fd(make_env("mountain"), -2, 2, -1.5, 1.5, 4);
}

TEST(RewardOracle, AnalyticAndLearned) {
  Env env = make_env("mountain");
  RewardOracle an = RewardOracle::analytic(env);
  const Vector s{0.2, 0.1}, a{0.3, -0.4};
  EXPECT_EQ(an.reward(s, a), env.reward(s, a));
  EXPECT_EQ(an.grad(s, a), env.reward_grad(s, a));
  // linear net r = w . [s; a] + b, so the action gradient is w's action part
  Approximator net(Architecture::linear(4, 1), ParamVector(Vector{1, 2, 3, 4, 0.5}));
  RewardOracle ln = RewardOracle::learned(net, 2);
  EXPECT_NEAR(ln.reward(s, a), 0.2 + 0.2 + 0.9 - 1.6 + 0.5, 1e-14);
  EXPECT_EQ(ln.grad(s, a), (Vector{3, 4}));
}

TEST(Rollout, Lengths) {
  Rng rng(3);
  auto b = rollout(make_env("peaks"), zero_policy(1, 1, 0.0), 5, rng);
  ASSERT_EQ(b.size(), 5u);
  for (const auto& t : b) {
    EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(t.steps[0].eps.size(), 1u);
  }
  auto m = rollout(make_env("mountain"), zero_policy(2, 2, 0.0), 3, rng);
  for (const auto& t : m) {
    EXPECT_EQ(t.size(), 10u);
    EXPECT_TRUE(t.steps.back().truncated);
    EXPECT_FALSE(t.steps.back().terminal);
  }
}

TEST(Rollout, DeterministicGivenSeed) {
  Env env = make_env("lqg");
  GaussianPolicy pi(Approximator(Architecture::diagonal(2), ParamVector(Vector{-1.1, -1.3})),
                    Vector{-20.0, -20.0}, false);
  Rng r1(99), r2(99);
  auto a = rollout(env, pi, 2, r1);
  auto b = rollout(env, pi, 2, r2);
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t t = 0; t < a[e].size(); ++t) {
      EXPECT_EQ(a[e].steps[t].s, b[e].steps[t].s);
      EXPECT_EQ(a[e].steps[t].a, b[e].steps[t].a);
      EXPECT_EQ(a[e].steps[t].r, b[e].steps[t].r);
    }
  }
}

TEST(Rollout, NanStateAborts) {
  LqgParams p;
  p.A = Eigen::Vector2d(1e300, 1e300).asDiagonal();
  Env env = LqgEnv(p);
  GaussianPolicy pi(Approximator(Architecture::diagonal(2)), Vector{0.0, 0.0}, false);
  Rng rng(0);
  EXPECT_THROW(rollout(env, pi, 1, rng), std::runtime_error);
}
