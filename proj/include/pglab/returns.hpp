#ifndef PGLAB_RETURNS_HPP_
#define PGLAB_RETURNS_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pglab/diffcore.hpp"

namespace pglab {

// G_t = r_t + gamma G_{t+1}, with G_T = bootstrap.
inline Vector compute_returns(std::span<const double> rewards, double gamma, double bootstrap = 0.0) {
  Vector g(rewards.size());
  double next = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    next = rewards[t] + gamma * next;
    g[t] = next;
  }
  return g;
}

// TD residuals; `values` holds v(S_0..S_T), i.e. one more entry than rewards.
inline Vector td_residuals(std::span<const double> rewards, std::span<const double> values,
                           double gamma) {
  require_dim(values.size(), rewards.size() + 1, "td_residuals values");
  Vector d(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    d[t] = rewards[t] + gamma * values[t + 1] - values[t];
  }
  return d;
}

// H_t = delta_t + gamma lambda H_{t+1}, H_T = 0.
inline Vector compute_gae(std::span<const double> rewards, std::span<const double> values,
                          double gamma, double lambda) {
  const Vector delta = td_residuals(rewards, values, gamma);
  Vector h(delta.size());
  double next = 0.0;
  for (std::size_t t = delta.size(); t-- > 0;) {
    next = delta[t] + gamma * lambda * next;
    h[t] = next;
  }
  return h;
}

// G^lambda_t = H_t + v(S_t).
inline Vector lambda_return(std::span<const double> gae, std::span<const double> values) {
  if (values.size() < gae.size()) throw std::invalid_argument("lambda_return: too few values");
  Vector g(gae.size());
  for (std::size_t t = 0; t < gae.size(); ++t) g[t] = gae[t] + values[t];
  return g;
}

inline constexpr double kAdvantageStdFloor = 1e-8;

// Zero mean, unit population std over the whole batch.
inline Vector normalize_advantages(std::span<const double> h) {
  if (h.size() < 2) throw std::invalid_argument("normalize_advantages: batch size must be >= 2");
  const double n = static_cast<double>(h.size());
  double mean = 0.0;
  for (double x : h) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : h) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  Vector out(h.size(), 0.0);
  if (sd < kAdvantageStdFloor) return out;
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = (h[i] - mean) / sd;
  return out;
}

}  // namespace pglab

#endif  // PGLAB_RETURNS_HPP_
