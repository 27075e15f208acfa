#ifndef PGLAB_LQG_ORACLE_HPP_
#define PGLAB_LQG_ORACLE_HPP_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pglab/envs.hpp"
#include "pglab/rng.hpp"

namespace pglab {

using Theta = std::array<double, 2>;

// Finite-horizon value of the linear policy a = diag(theta) s + Sigma eps:
// v_t(s) = s' P_t s + c_t for t = 0..T, with P_T = 0 and c_T = 0.
struct QuadraticValue {
  std::vector<Eigen::Matrix2d> P;
  std::vector<double> c;
  double max_asymmetry = 0.0;  // largest |P - P'| seen before symmetrization

  std::size_t horizon() const { return P.size() - 1; }

  double value(std::size_t t, std::span<const double> s) const {
    auto sv = as_vec2(s);
    return sv.dot(P.at(t) * sv) + c.at(t);
  }
  double quadratic_part(std::size_t t, std::span<const double> s) const {
    auto sv = as_vec2(s);
    return sv.dot(P.at(t) * sv);
  }
  Eigen::Vector2d grad(std::size_t t, const Eigen::Vector2d& s) const {
    return (P.at(t) + P.at(t).transpose()) * s;
  }
};

inline QuadraticValue exact_value(const Theta& theta, const LqgParams& p) {
  const Eigen::Matrix2d Th = Eigen::Vector2d(theta[0], theta[1]).asDiagonal();
  const Eigen::Matrix2d M = p.A + p.B * Th;
  const Eigen::Matrix2d stage = p.Q + Th.transpose() * p.Z * Th;
  const Eigen::Matrix2d BS = p.B * p.Sigma;
  const double noise_cost = (p.Sigma.transpose() * p.Z * p.Sigma).trace();

  QuadraticValue v;
  const std::size_t T = p.horizon;
  v.P.assign(T + 1, Eigen::Matrix2d::Zero());
  v.c.assign(T + 1, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    const Eigen::Matrix2d& next = v.P[t + 1];
    Eigen::Matrix2d Pt = -stage + p.gamma * M.transpose() * next * M;
    v.max_asymmetry = std::max(v.max_asymmetry, (Pt - Pt.transpose()).cwiseAbs().maxCoeff());
    v.P[t] = 0.5 * (Pt + Pt.transpose());
    v.c[t] = -noise_cost + p.gamma * ((BS.transpose() * next * BS).trace() + v.c[t + 1]);
  }
  return v;
}

// J(theta) = v_0(s0); p0 is a point mass.
inline double exact_objective(const Theta& theta, const LqgParams& p) {
  const QuadraticValue v = exact_value(theta, p);
  return p.s0.dot(v.P[0] * p.s0) + v.c[0];
}

// Central differences of exact_objective.
inline Theta true_gradient(const Theta& theta, const LqgParams& p, double h = 1e-6) {
  if (!(h > 0.0)) throw std::invalid_argument("true_gradient: h must be > 0");
  Theta g{};
  for (std::size_t i = 0; i < 2; ++i) {
    Theta up = theta, dn = theta;
    up[i] += h;
    dn[i] -= h;
    g[i] = (exact_objective(up, p) - exact_objective(dn, p)) / (2 * h);
  }
  return g;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

// Empirical discounted return of the LQG policy over `n` independent
// episodes. Allocation-free loop; used to validate the recursion.
inline MonteCarloEstimate monte_carlo_objective(const Theta& theta, const LqgParams& p,
                                                std::size_t n, Rng& rng) {
  const double a0 = p.A(0, 0), a1 = p.A(1, 1), b0 = p.B(0, 0), b1 = p.B(1, 1);
  const double q0 = p.Q(0, 0), q1 = p.Q(1, 1), z0 = p.Z(0, 0), z1 = p.Z(1, 1);
  const double sg0 = p.Sigma(0, 0), sg1 = p.Sigma(1, 1);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t ep = 0; ep < n; ++ep) {
    double s0 = p.s0[0], s1 = p.s0[1], disc = 1.0, g = 0.0;
    for (std::size_t t = 0; t < p.horizon; ++t) {
      const double u0 = theta[0] * s0 + sg0 * rng.normal();
      const double u1 = theta[1] * s1 + sg1 * rng.normal();
      g += disc * (-(q0 * s0 * s0 + q1 * s1 * s1) - (z0 * u0 * u0 + z1 * u1 * u1));
      s0 = a0 * s0 + b0 * u0;
      s1 = a1 * s1 + b1 * u1;
      disc *= p.gamma;
    }
    sum += g;
    sum_sq += g * g;
  }
  MonteCarloEstimate est;
  est.n = n;
  est.mean = sum / static_cast<double>(n);
  const double var = (sum_sq - static_cast<double>(n) * est.mean * est.mean) / static_cast<double>(n - 1);
  est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  return est;
}

// Fixed evaluation point for the LQG bias/variance study.
inline constexpr Theta kLqgEvalTheta{-1.1104430687690852, -1.3649958298432607};

// LQG policy: mean = diag(theta) s, fixed sigma from Sigma's diagonal.
inline GaussianPolicy lqg_policy(const Theta& theta, const LqgParams& p) {
  Approximator mean(Architecture::diagonal(2), ParamVector(Vector{theta[0], theta[1]}));
  return GaussianPolicy(std::move(mean), {std::log(p.Sigma(0, 0)), std::log(p.Sigma(1, 1))},
                        /*learn_log_std=*/false);
}

}  // namespace pglab

#endif  // PGLAB_LQG_ORACLE_HPP_
