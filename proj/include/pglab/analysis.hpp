#ifndef PGLAB_ANALYSIS_HPP_
#define PGLAB_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pglab/diffcore.hpp"
#include "pglab/estimators.hpp"
#include "pglab/parallel.hpp"
#include "pglab/rng.hpp"

namespace pglab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BiasVarianceRow {
  std::string estimator;
  std::size_t n_samples = 0;
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  Interval bias2_ci;
  Interval var_ci;
  Interval mse_ci;
  std::size_t M = 0;
  std::uint64_t seed = 0;
};

inline const char* kBiasVarianceCsvHeader =
    "estimator,n_samples,bias2,bias2_lo,bias2_hi,variance,var_lo,var_hi,mse,mse_lo,mse_hi,M,seed";

// Linear-interpolated quantile of sorted data, q in [0, 1].
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Percentile interval of `stat` over B resamples (with replacement) of the
// indices 0..n-1.
inline Interval bootstrap_ci(std::size_t n, std::size_t B, double level, Rng& rng,
                             const std::function<double(std::span<const std::size_t>)>& stat) {
  if (n == 0) throw std::invalid_argument("bootstrap_ci: empty sample");
  if (B < 100) throw std::invalid_argument("bootstrap_ci: B must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level in (0,1)");
  std::vector<std::size_t> idx(n);
  Vector stats(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (auto& i : idx) i = rng.uniform_index(n);
    stats[b] = stat(idx);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - level);
  return {sorted_quantile(stats, tail), sorted_quantile(stats, 1.0 - tail)};
}

// Bootstrap CI of the sample mean.
inline Interval bootstrap_ci(std::span<const double> values, std::size_t B, double level, Rng& rng) {
  return bootstrap_ci(values.size(), B, level, rng, [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += values[i];
    return s / static_cast<double>(idx.size());
  });
}

struct ErrorMetrics {
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

// Squared-Euclidean bias, variance and MSE of the estimates selected by idx.
inline ErrorMetrics error_metrics(std::span<const ParamVector> est, std::span<const std::size_t> idx,
                                  std::span<const double> truth) {
  const std::size_t d = truth.size();
  const double m = static_cast<double>(idx.size());
  Vector mean(d, 0.0);
  for (auto i : idx) {
    require_dim(est[i].size(), d, "error_metrics estimate");
    for (std::size_t k = 0; k < d; ++k) mean[k] += est[i][k];
  }
  for (double& x : mean) x /= m;
  ErrorMetrics e;
  for (std::size_t k = 0; k < d; ++k) e.bias2 += (mean[k] - truth[k]) * (mean[k] - truth[k]);
  for (auto i : idx) {
    for (std::size_t k = 0; k < d; ++k) {
      const double dv = est[i][k] - mean[k];
      const double dt = est[i][k] - truth[k];
      e.variance += dv * dv;
      e.mse += dt * dt;
    }
  }
  e.variance /= m;
  e.mse /= m;
  return e;
}

struct BiasVarianceConfig {
  std::vector<std::size_t> n_list{10, 25, 50, 75, 100};
  std::size_t M = 1000;
  std::size_t B = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// One estimate from n fresh samples, drawn from the given stream seed.
using EstimateFn = std::function<ParamVector(std::size_t n, std::uint64_t seed)>;

inline std::uint64_t cell_seed(std::uint64_t master, std::size_t n, std::size_t rep) {
  return stream_seed(stream_seed(master, n), rep);
}

inline std::vector<BiasVarianceRow> bias_variance_mse(const std::string& estimator_id,
                                                      const EstimateFn& draw,
                                                      std::span<const double> truth,
                                                      const BiasVarianceConfig& cfg) {
  if (cfg.M < 2) throw std::invalid_argument("bias_variance_mse: M must be >= 2");
  if (cfg.n_list.empty()) throw std::invalid_argument("bias_variance_mse: empty n_list");
  std::vector<BiasVarianceRow> rows;
  for (std::size_t n : cfg.n_list) {
    if (n == 0) throw std::invalid_argument("bias_variance_mse: n must be >= 1");
    std::vector<ParamVector> est(cfg.M);
    parallel_for(cfg.M, [&](std::size_t i) { est[i] = draw(n, cell_seed(cfg.seed, n, i)); });

    std::vector<std::size_t> all(cfg.M);
    for (std::size_t i = 0; i < cfg.M; ++i) all[i] = i;
    const ErrorMetrics point = error_metrics(est, all, truth);

    // One resample set shared by all three statistics.
    Rng rng = Rng::for_stream(stream_seed(cfg.seed, n), 0xB0075);
    std::vector<ErrorMetrics> boot(cfg.B);
    std::size_t b = 0;
    bootstrap_ci(cfg.M, cfg.B, cfg.level, rng, [&](std::span<const std::size_t> idx) {
      boot[b++] = error_metrics(est, idx, truth);
      return 0.0;
    });
    auto ci = [&](double ErrorMetrics::*field) {
      Vector v(cfg.B);
      for (std::size_t k = 0; k < cfg.B; ++k) v[k] = boot[k].*field;
      std::sort(v.begin(), v.end());
      const double tail = 0.5 * (1.0 - cfg.level);
      return Interval{sorted_quantile(v, tail), sorted_quantile(v, 1.0 - tail)};
    };

    BiasVarianceRow row;
    row.estimator = estimator_id;
    row.n_samples = n;
    row.bias2 = point.bias2;
    row.variance = point.variance;
    row.mse = point.mse;
    row.bias2_ci = ci(&ErrorMetrics::bias2);
    row.var_ci = ci(&ErrorMetrics::variance);
    row.mse_ci = ci(&ErrorMetrics::mse);
    row.M = cfg.M;
    row.seed = cfg.seed;
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<BiasVarianceRow> bias_variance_mse(EstimatorKind kind,
                                                      const EstimationProblem& problem,
                                                      std::span<const double> truth,
                                                      const BiasVarianceConfig& cfg) {
  EstimateFn draw = [&](std::size_t n, std::uint64_t seed) {
    return draw_estimate(kind, problem, n, seed).grad;
  };
  return bias_variance_mse(std::string(estimator_name(kind)), draw, truth, cfg);
}

}  // namespace pglab

#endif  // PGLAB_ANALYSIS_HPP_
