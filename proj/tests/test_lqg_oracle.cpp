#include <gtest/gtest.h>

#include <cmath>

#include "pglab/lqg_oracle.hpp"

using namespace pglab;

namespace {

// Plain scalar Monte Carlo of the discounted return, one coordinate loop per
// dimension; kept separate from the library's estimator.
std::pair<double, double> mc_return(const Theta& th, const LqgParams& p, int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  double sum = 0.0, sq = 0.0;
  for (int e = 0; e < n; ++e) {
    double s[2] = {p.s0[0], p.s0[1]};
    double g = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < p.horizon; ++t) {
      double r = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double a = th[i] * s[i] + p.Sigma(i, i) * nd(eng);
        r -= p.Q(i, i) * s[i] * s[i] + p.Z(i, i) * a * a;
        s[i] = p.A(i, i) * s[i] + p.B(i, i) * a;
      }
      g += disc * r;
      disc *= p.gamma;
    }
    sum += g;
    sq += g * g;
  }
  const double m = sum / n;
  return {m, std::sqrt((sq / n - m * m) / n)};
}

}  // namespace

TEST(ExactValue, NoNoiseNoControlIsGeometric) {
  LqgParams p;
  p.Sigma.setZero();
  QuadraticValue v = exact_value({0.0, 0.0}, p);
  double geo = 0.0, term = 1.0;
  for (std::size_t k = 0; k < p.horizon; ++k, term *= p.gamma * 1e-4) geo += term;
  const Vector s{0.3, -0.7};
  const double ss = 0.09 + 0.49;
  EXPECT_NEAR(v.value(0, s), -ss * geo, 1e-14);
  EXPECT_NEAR(v.value(0, s), -ss, 1e-4);
  EXPECT_EQ(v.value(p.horizon, s), 0.0);
}

TEST(ExactValue, SingleStep) {
  LqgParams p;
  p.horizon = 1;
  const Theta th{-0.4, 0.9};
  QuadraticValue v = exact_value(th, p);
  const Vector s{0.5, 0.5};
  const double stage = 0.25 * (1 + th[0] * th[0]) + 0.25 * (1 + th[1] * th[1]);
  EXPECT_NEAR(v.value(0, s), -stage - (0.01 + 0.01), 1e-15);
}

TEST(ExactValue, SymmetricAtEveryStep) {
  QuadraticValue v = exact_value({0.3, -2.0}, LqgParams{});
  EXPECT_LT(v.max_asymmetry, 1e-12);
  for (const auto& P : v.P) EXPECT_EQ(P, P.transpose());
}

TEST(ExactObjective, MatchesMonteCarloAtEvalTheta) {
  LqgParams p;
  const auto [m, se] = mc_return(kLqgEvalTheta, p, 200000, 1);
  EXPECT_LT(std::abs(exact_objective(kLqgEvalTheta, p) - m), 3 * se);
}

TEST(ExactObjective, LibraryMonteCarloAgrees) {
  LqgParams p;
  Rng rng(4);
  const Theta th{0.5, -0.25};
  MonteCarloEstimate e = monte_carlo_objective(th, p, 200000, rng);
  EXPECT_LT(std::abs(exact_objective(th, p) - e.mean), 3 * e.std_error);
}

TEST(TrueGradient, VanishesAtMaximum) {
  LqgParams p;
  Theta th{-1.0, 1.5};
  for (int it = 0; it < 200; ++it) {
    Theta g = true_gradient(th, p);
    th[0] += g[0];
    th[1] += g[1];
  }
  Theta g = true_gradient(th, p);
  EXPECT_LT(std::hypot(g[0], g[1]), 1e-4);
}

TEST(TrueGradient, SymmetricProblem) {
  Theta g = true_gradient({-0.8, -0.8}, LqgParams{});
  EXPECT_NEAR(g[0], g[1], 1e-9);
}

TEST(TrueGradient, StepRobust) {
  LqgParams p;
  Theta a = true_gradient(kLqgEvalTheta, p, 1e-5), b = true_gradient(kLqgEvalTheta, p, 1e-7);
  for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(a[i] - b[i]) / std::abs(a[i]), 1e-4);
}

TEST(TrueGradient, FrozenAtEvalTheta) {
  // Regression constants: the stage cost -theta^2 s^2 dominates, so
  // dJ/dtheta_i ~ -2 theta_i * 0.25 at the first step.
  Theta g = true_gradient(kLqgEvalTheta, LqgParams{});
  EXPECT_NEAR(g[0], -2 * kLqgEvalTheta[0] * 0.25, 2e-3);
  EXPECT_NEAR(g[1], -2 * kLqgEvalTheta[1] * 0.25, 2e-3);
  // frozen values
  EXPECT_NEAR(g[0], 0.55527421327639104, 1e-9);
  EXPECT_NEAR(g[1], 0.68256227425678162, 1e-9);
}

TEST(LqgPolicy, FixedSigma) {
  GaussianPolicy pi = lqg_policy(kLqgEvalTheta, LqgParams{});
  EXPECT_FALSE(pi.learns_log_std());
  EXPECT_EQ(pi.param_count(), 2u);
  EXPECT_NEAR(pi.sigma()[0], 0.1, 1e-15);
  Vector mu = pi.mean(Vector{0.5, 0.5});
  EXPECT_DOUBLE_EQ(mu[0], 0.5 * kLqgEvalTheta[0]);
}
