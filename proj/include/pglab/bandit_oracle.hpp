#ifndef PGLAB_BANDIT_ORACLE_HPP_
#define PGLAB_BANDIT_ORACLE_HPP_

#include <cmath>
#include <stdexcept>

#include "pglab/diffcore.hpp"
#include "pglab/envs.hpp"

namespace pglab {

struct QuadratureGrid {
  double lo = -30.0;
  double hi = 30.0;
  std::size_t points = 1000000;
};

// E_{a ~ N(mu, sigma)} r(a) by the trapezoid rule.
inline double bandit_objective(const BanditEnv& env, double mu, double sigma,
                               const QuadratureGrid& grid = {}) {
  if (!(sigma > 0.0)) throw std::invalid_argument("bandit_objective: sigma must be > 0");
  if (grid.points < 2) throw std::invalid_argument("bandit_objective: need >= 2 points");
  const double h = (grid.hi - grid.lo) / static_cast<double>(grid.points - 1);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  const double s0 = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double a = grid.lo + h * static_cast<double>(i);
    const double z = (a - mu) / sigma;
    const double f = norm * std::exp(-0.5 * z * z) * env.reward({&s0, 1}, {&a, 1});
    acc += (i == 0 || i + 1 == grid.points) ? 0.5 * f : f;
  }
  return acc * h;
}

// Ground-truth gradient for the bandit_problem policy layout [W, b, log_std]
// with input 0: (0, dJ/dmu, dJ/dlog_sigma), central differences of the
// quadrature objective.
inline ParamVector bandit_true_gradient(const BanditEnv& env, double mu, double sigma,
                                        double h = 1e-4, const QuadratureGrid& grid = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("bandit_true_gradient: h must be > 0");
  const double ls = std::log(sigma);
  const double d_mu = (bandit_objective(env, mu + h, sigma, grid) -
                       bandit_objective(env, mu - h, sigma, grid)) / (2 * h);
  const double d_ls = (bandit_objective(env, mu, std::exp(ls + h), grid) -
                       bandit_objective(env, mu, std::exp(ls - h), grid)) / (2 * h);
  return ParamVector(Vector{0.0, d_mu, d_ls});
}

}  // namespace pglab

#endif  // PGLAB_BANDIT_ORACLE_HPP_
