#include <gtest/gtest.h>

#include <cmath>

#include "pglab/analysis.hpp"
#include "pglab/parallel.hpp"

using namespace pglab;

namespace {

BiasVarianceConfig small_cfg() {
  BiasVarianceConfig c;
  c.n_list = {1, 5};
  c.M = 50;
  c.B = 200;
  c.seed = 3;
  return c;
}

void expect_decomposition(const BiasVarianceRow& r) {
  EXPECT_LE(std::abs(r.mse - r.bias2 - r.variance), 1e-6 * std::max(1.0, r.mse));
  EXPECT_GE(r.bias2, 0.0);
  EXPECT_GE(r.variance, 0.0);
}

}  // namespace

TEST(BiasVariance, PerfectEstimatorIsZero) {
  const Vector truth{1.5, -2.0};
  auto rows = bias_variance_mse(
      "oracle", [&](std::size_t, std::uint64_t) { return ParamVector(truth); }, truth, small_cfg());
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.bias2, 0.0);
    EXPECT_EQ(r.variance, 0.0);
    EXPECT_EQ(r.mse, 0.0);
    EXPECT_EQ(r.mse_ci.lo, 0.0);
    EXPECT_EQ(r.mse_ci.hi, 0.0);
  }
}

TEST(BiasVariance, FixedOffset) {
  const Vector truth{1.0, 1.0};
  auto rows = bias_variance_mse(
      "offset", [&](std::size_t, std::uint64_t) { return ParamVector(Vector{4.0, -3.0}); }, truth,
      small_cfg());
  for (const auto& r : rows) {
    EXPECT_NEAR(r.bias2, 9.0 + 16.0, 1e-12);
    EXPECT_NEAR(r.variance, 0.0, 1e-12);
    EXPECT_NEAR(r.mse, 25.0, 1e-12);
  }
}

TEST(BiasVariance, DecompositionOnNoisyEstimates) {
  const Vector truth{0.0, 0.0, 0.0};
  auto rows = bias_variance_mse(
      "noisy",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        ParamVector g(3);
        for (double& x : g) x = 0.3 + 10 * rng.normal() / std::sqrt(static_cast<double>(n));
        return g;
      },
      truth, small_cfg());
  for (const auto& r : rows) {
    expect_decomposition(r);
    EXPECT_LE(r.bias2_ci.lo, r.bias2_ci.hi);
    EXPECT_LE(r.var_ci.lo, r.variance);
    EXPECT_GE(r.var_ci.hi, r.variance);
    EXPECT_EQ(r.M, 50u);
  }
}

TEST(BiasVariance, RejectsTinyM) {
  BiasVarianceConfig c = small_cfg();
  c.M = 1;
  EXPECT_THROW(bias_variance_mse("x", [](std::size_t, std::uint64_t) { return ParamVector(1); },
                                 Vector{0.0}, c),
               std::invalid_argument);
}

TEST(BiasVariance, DeterministicAcrossWorkerCounts) {
  EstimationProblem p = lqg_problem(kLqgEvalTheta, LqgParams{});
  const Theta t = true_gradient(kLqgEvalTheta, LqgParams{});
  const Vector truth{t[0], t[1]};
  BiasVarianceConfig c = small_cfg();
  auto a = bias_variance_mse(EstimatorKind::kRpg, p, truth, c);
  // same cells computed one at a time
  std::vector<ParamVector> serial(c.M);
  parallel_for(c.M, [&](std::size_t i) { serial[i] = draw_estimate(EstimatorKind::kRpg, p, 5, cell_seed(c.seed, 5, i)).grad; }, 1);
  std::vector<std::size_t> all(c.M);
  for (std::size_t i = 0; i < c.M; ++i) all[i] = i;
  ErrorMetrics e = error_metrics(serial, all, truth);
  EXPECT_EQ(a[1].variance, e.variance);
  EXPECT_EQ(a[1].bias2, e.bias2);
  auto b = bias_variance_mse(EstimatorKind::kRpg, p, truth, c);
  EXPECT_EQ(a[0].mse_ci.lo, b[0].mse_ci.lo);
  EXPECT_EQ(a[1].var_ci.hi, b[1].var_ci.hi);
}

TEST(BiasVariance, LqgVarianceScalesInverselyWithN) {
  EstimationProblem p = lqg_problem(kLqgEvalTheta, LqgParams{});
  const Theta t = true_gradient(kLqgEvalTheta, LqgParams{});
  BiasVarianceConfig c;
  c.n_list = {10, 100};
  c.M = 200;
  c.B = 100;
  for (auto k : {EstimatorKind::kPg, EstimatorKind::kRpg}) {
    auto rows = bias_variance_mse(k, p, Vector{t[0], t[1]}, c);
    const double ratio = rows[1].variance / rows[0].variance;
    EXPECT_GE(ratio, 0.05) << estimator_name(k);
    EXPECT_LE(ratio, 0.2) << estimator_name(k);
    for (const auto& r : rows) expect_decomposition(r);
  }
}

TEST(Bootstrap, ConstantValuesZeroWidth) {
  Rng rng(1);
  Interval ci = bootstrap_ci(Vector(20, 3.25), 500, 0.95, rng);
  EXPECT_EQ(ci.lo, 3.25);
  EXPECT_EQ(ci.hi, 3.25);
}

TEST(Bootstrap, TwoPointSampleMatchesEnumeration) {
  // Resampled means of {0, 1}: 0 w.p. 1/4, 1/2 w.p. 1/2, 1 w.p. 1/4.
  Rng rng(2);
  const Vector v{0.0, 1.0};
  Interval wide = bootstrap_ci(v, 20000, 0.95, rng);
  EXPECT_EQ(wide.lo, 0.0);
  EXPECT_EQ(wide.hi, 1.0);
  Interval mid = bootstrap_ci(v, 20000, 0.4, rng);  // 30th / 70th percentiles
  EXPECT_EQ(mid.lo, 0.5);
  EXPECT_EQ(mid.hi, 0.5);
}

TEST(Bootstrap, ContainsPointEstimate) {
  Rng rng(3);
  Vector v(100);
  for (double& x : v) x = rng.normal();
  double m = 0;
  for (double x : v) m += x;
  m /= 100;
  Interval ci = bootstrap_ci(v, 1000, 0.95, rng);
  EXPECT_LT(ci.lo, m);
  EXPECT_GT(ci.hi, m);
}

TEST(Bootstrap, Preconditions) {
  Rng rng(4);
  EXPECT_THROW(bootstrap_ci(Vector{1.0, 2.0}, 99, 0.95, rng), std::invalid_argument);
  EXPECT_THROW(bootstrap_ci(Vector{}, 100, 0.95, rng), std::invalid_argument);
  EXPECT_THROW(bootstrap_ci(Vector{1.0}, 100, 1.0, rng), std::invalid_argument);
}

TEST(Quantile, LinearInterpolation) {
  const Vector s{1.0, 2.0, 4.0};
  EXPECT_EQ(sorted_quantile(s, 0.0), 1.0);
  EXPECT_EQ(sorted_quantile(s, 0.75), 3.0);
  EXPECT_EQ(sorted_quantile(s, 1.0), 4.0);
}

TEST(Parallel, RethrowsAndCoversAll) {
  std::vector<int> hit(100, 0);
  parallel_for(100, [&](std::size_t i) { hit[i] += 1; }, 4);
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }, 3),
               std::runtime_error);
}
