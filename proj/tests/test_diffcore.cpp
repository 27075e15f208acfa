#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pglab/diffcore.hpp"

using namespace pglab;

namespace {

Approximator random_mlp(std::size_t in, std::vector<std::size_t> hidden, std::size_t out,
                        std::uint64_t seed) {
  Rng rng(seed);
  Approximator a(Architecture::mlp(in, std::move(hidden), out));
  ParamVector p(a.param_count());
  for (double& x : p) x = rng.uniform(-1.0, 1.0);
  a.set_params(p);
  return a;
}

// Central differences written out independently of finite_diff_check.
double fd_param(const Approximator& a, const Vector& x, const Vector& cot, std::size_t j, double h) {
  ParamVector p = a.params();
  Approximator probe = a;
  auto f = [&](double v) {
    p[j] = v;
    probe.set_params(p);
    Vector y = forward(probe, x);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += cot[k] * y[k];
    return s;
  };
  const double orig = a.params()[j];
  return (f(orig + h) - f(orig - h)) / (2 * h);
}

}  // namespace

TEST(Forward, LinearIdentity) {
  Approximator a(Architecture::linear(2, 2), ParamVector(Vector{1, 0, 0, 1, 0, 0}));
  Vector y = forward(a, Vector{0.5, 0.5});
  EXPECT_EQ(y, (Vector{0.5, 0.5}));
}

TEST(Forward, ZeroMlpGivesZero) {
  Approximator a(Architecture::mlp(3, {64, 64}, 2));
  EXPECT_EQ(forward(a, Vector{3.0, -7.0, 1e3}), (Vector{0.0, 0.0}));
}

TEST(Forward, SmallMlpMatchesHandEvaluation) {
  Approximator a = random_mlp(2, {2}, 1, 11);
  const auto& p = a.params();
  // layout: W1 (2x2 row-major), b1, W2 (1x2), b2
  const double x0 = 1.0, x1 = -1.0;
  const double h0 = std::tanh(p[0] * x0 + p[1] * x1 + p[4]);
  const double h1 = std::tanh(p[2] * x0 + p[3] * x1 + p[5]);
  const double y = p[6] * h0 + p[7] * h1 + p[8];
  EXPECT_NEAR(forward(a, Vector{x0, x1})[0], y, 1e-15);
}

TEST(Forward, DimensionMismatchThrows) {
  Approximator a(Architecture::linear(2, 1));
  EXPECT_THROW(forward(a, Vector{1.0}), std::invalid_argument);
}

TEST(Forward, PureFunction) {
  Approximator a = random_mlp(4, {64, 64}, 3, 5);
  const Vector x{0.1, -0.2, 0.3, 0.9};
  EXPECT_EQ(forward(a, x), forward(a, x));
}

TEST(Params, RoundTrip) {
  Approximator a = random_mlp(3, {5, 4}, 2, 9);
  Approximator b(Architecture::mlp(3, {5, 4}, 2));
  b.set_params(a.params());
  EXPECT_EQ(b.params(), a.params());
  EXPECT_EQ(a.param_count(), 3u * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
  EXPECT_THROW(b.set_params(ParamVector(3)), std::invalid_argument);
  ParamVector bad = a.params();
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(b.set_params(bad), std::invalid_argument);
}

TEST(GradParams, LinearScalar) {
  Approximator a(Architecture::linear(3, 1), ParamVector(Vector{0.3, -1.2, 2.0, 0.7}));
  const Vector x{1.5, -2.0, 0.25};
  ParamVector g = grad_params(a, x, Vector{1.0});
  EXPECT_EQ(g.values(), (Vector{1.5, -2.0, 0.25, 1.0}));
}

TEST(GradParams, ZeroCotangent) {
  Approximator a = random_mlp(2, {4}, 3, 1);
  ParamVector g = grad_params(a, Vector{0.3, 0.4}, Vector{0, 0, 0});
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(GradParams, MlpMatchesFiniteDifferences) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Approximator a = random_mlp(2, {4}, 1, 100 + rep);
    Vector x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    ParamVector g = grad_params(a, x, Vector{1.0});
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_LT(relative_error(g[j], fd_param(a, x, {1.0}, j, 1e-5)), 1e-5);
    }
  }
}

TEST(GradParams, CotangentSizeChecked) {
  Approximator a(Architecture::linear(2, 2));
  EXPECT_THROW(grad_params(a, Vector{1, 2}, Vector{1}), std::invalid_argument);
}

TEST(GradInput, LinearIsTransposeProduct) {
  // W = [[1,2],[3,4],[5,6]]
  Approximator a(Architecture::linear(2, 3), ParamVector(Vector{1, 2, 3, 4, 5, 6, 0, 0, 0}));
  Vector g = grad_input(a, Vector{9, 9}, Vector{1, -1, 2});
  EXPECT_EQ(g, (Vector{1 - 3 + 10, 2 - 4 + 12}));
}

TEST(GradInput, ConstantFunctionIsZero) {
  Approximator a = random_mlp(2, {3}, 1, 4);
  ParamVector p = a.params();
  for (std::size_t j = 0; j < 3 * 2 + 3; ++j) p[j] = 0.0;  // first layer off
  a.set_params(p);
  for (double v : grad_input(a, Vector{0.7, -3.0}, Vector{1.0})) EXPECT_EQ(v, 0.0);
}

TEST(GradInput, MlpMatchesFiniteDifferences) {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    Approximator a = random_mlp(3, {6, 5}, 2, 200 + rep);
    Vector x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vector cot{rng.normal(), rng.normal()};
    Vector g = grad_input(a, x, cot);
    for (std::size_t j = 0; j < x.size(); ++j) {
      Vector up = x, dn = x;
      up[j] += 1e-5;
      dn[j] -= 1e-5;
      Vector yu = forward(a, up), yd = forward(a, dn);
      const double fd = (cot[0] * (yu[0] - yd[0]) + cot[1] * (yu[1] - yd[1])) / 2e-5;
      EXPECT_LT(relative_error(g[j], fd), 1e-5);
    }
  }
}

TEST(Diagonal, ForwardAndGradients) {
  Approximator a(Architecture::diagonal(2), ParamVector(Vector{-1.5, 0.5}));
  EXPECT_EQ(forward(a, Vector{2, 4}), (Vector{-3, 2}));
  Gradients g = backward(a, Vector{2, 4}, Vector{1, 10});
  EXPECT_EQ(g.params.values(), (Vector{2, 40}));
  EXPECT_EQ(g.input, (Vector{-1.5, 5}));
}

TEST(FiniteDiffCheck, LinearIsExact) {
  Rng rng(2);
  Approximator a = Approximator::initialized(Architecture::linear(4, 3), rng);
  EXPECT_LT(finite_diff_check(a, Vector{0.1, 0.2, -0.3, 1.0}, 1e-5), 1e-9);
}

TEST(FiniteDiffCheck, DeepMlp) {
  Approximator a = random_mlp(2, {64, 64}, 1, 77);
  ParamVector p = a.params();
  for (double& x : p) x *= 0.3;
  a.set_params(p);
  EXPECT_LT(finite_diff_check(a, Vector{0.4, -0.8}, 1e-5), 1e-5);
}

TEST(FiniteDiffCheck, ZeroStepRejected) {
  Approximator a(Architecture::linear(1, 1));
  EXPECT_THROW(finite_diff_check(a, Vector{1.0}, 0.0), std::invalid_argument);
}

TEST(Batch, MatchesPerSamplePasses) {
  Approximator a = random_mlp(3, {7, 5}, 2, 31);
  Rng rng(6);
  std::vector<Vector> xs(9, Vector(3));
  for (auto& x : xs)
    for (double& v : x) v = rng.normal();
  const BatchTape tape = forward_batch(a, columns(xs, 3));
  Matrix cot(2, 9);
  cot.setRandom();
  const BatchGradients bg = backward_batch(a, tape, cot);
  ParamVector sum(a.param_count());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Vector y = forward(a, xs[k]);
    for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(tape.output()(o, k), y[o], 1e-13);
    Gradients g = backward(a, xs[k], Vector{cot(0, k), cot(1, k)});
    sum += g.params;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(bg.input(i, k), g.input[i], 1e-12);
  }
  for (std::size_t j = 0; j < sum.size(); ++j) EXPECT_NEAR(bg.params[j], sum[j], 1e-10);
}

TEST(Adam, FirstStepClosedForm) {
  ParamVector p(Vector{1.0, -2.0, 0.5});
  const ParamVector g(Vector{0.3, -4.0, 1e-3});
  AdamState st(3, AdamConfig{0.01});
  adam_step(p, g, st);
  const Vector start{1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], start[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
  }
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ParamVector p(Vector{1.0, 2.0});
  AdamState st(2, AdamConfig{});
  adam_step(p, ParamVector(Vector{1.0, 1.0}), st);
  const ParamVector m = st.m, v = st.v;
  // moments decay, params still move by the decayed first moment
  adam_step(p, ParamVector(2), st);
  EXPECT_NEAR(st.m[0], 0.9 * m[0], 1e-15);
  EXPECT_NEAR(st.v[0], 0.999 * v[0], 1e-15);
  ParamVector q(Vector{3.0, 4.0});
  AdamState fresh(2, AdamConfig{});
  adam_step(q, ParamVector(2), fresh);
  EXPECT_EQ(q.values(), (Vector{3.0, 4.0}));
}

TEST(Adam, TwoStepsHandRecursion) {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, e = 1e-8, g = 2.0;
  ParamVector p(Vector{0.0});
  AdamState st(1, AdamConfig{lr, b1, b2, e});
  adam_step(p, ParamVector(Vector{g}), st);
  adam_step(p, ParamVector(Vector{g}), st);
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + e);
  }
  EXPECT_NEAR(p[0], x, 1e-15);
}

TEST(Adam, NonFiniteGradientRejected) {
  ParamVector p(1);
  AdamState st(1, AdamConfig{});
  EXPECT_THROW(adam_step(p, ParamVector(Vector{std::numeric_limits<double>::infinity()}), st),
               std::invalid_argument);
}
