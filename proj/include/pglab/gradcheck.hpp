#ifndef PGLAB_GRADCHECK_HPP_
#define PGLAB_GRADCHECK_HPP_

#include <algorithm>
#include <functional>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pglab/diffcore.hpp"
#include "pglab/policy.hpp"
#include "pglab/rng.hpp"

namespace pglab {

// One named gradient check; `run` draws a random case and returns its
// max relative error against central differences.
struct GradCheck {
  std::string name;
  std::function<double(Rng&)> run;
};

struct GradCheckResult {
  std::string name;
  std::size_t cases = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTol = 1e-5;

namespace gradcheck_detail {

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline GaussianPolicy random_policy(Rng& rng) {
  const std::size_t sd = 1 + rng.uniform_index(3), ad = 1 + rng.uniform_index(2);
  Approximator mean = Approximator::initialized(Architecture::mlp(sd, {6, 5}, ad), rng, 1.0);
  return GaussianPolicy(std::move(mean), random_vector(rng, ad, -1.0, 0.5), true);
}

// Max relative error of `analytic` against central differences of the
// scalar f over the policy parameters.
template <typename F>
double policy_fd(GaussianPolicy pi, const ParamVector& analytic, F&& f) {
  ParamVector p = pi.params();
  double worst = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double orig = p[j];
    p[j] = orig + kGradCheckStep;
    pi.set_params(p);
    const double up = f(pi);
    p[j] = orig - kGradCheckStep;
    pi.set_params(p);
    const double dn = f(pi);
    p[j] = orig;
    worst = std::max(worst, relative_error(analytic[j], (up - dn) / (2 * kGradCheckStep)));
  }
  return worst;
}

}  // namespace gradcheck_detail

inline std::vector<GradCheck> default_gradchecks() {
  using namespace gradcheck_detail;
  std::vector<GradCheck> checks;
  checks.push_back({"approximator.linear", [](Rng& rng) {
                      const std::size_t in = 1 + rng.uniform_index(4), out = 1 + rng.uniform_index(3);
                      auto a = Approximator::initialized(Architecture::linear(in, out), rng, 1.0);
                      return finite_diff_check(a, random_vector(rng, in), kGradCheckStep);
                    }});
  checks.push_back({"approximator.diagonal", [](Rng& rng) {
                      const std::size_t d = 1 + rng.uniform_index(4);
                      Approximator a(Architecture::diagonal(d), ParamVector(random_vector(rng, d, -2, 2)));
                      return finite_diff_check(a, random_vector(rng, d), kGradCheckStep);
                    }});
  checks.push_back({"approximator.mlp", [](Rng& rng) {
                      const std::size_t in = 1 + rng.uniform_index(4), out = 1 + rng.uniform_index(3);
                      auto a = Approximator::initialized(Architecture::mlp(in, {8, 8}, out), rng, 1.0);
                      return finite_diff_check(a, random_vector(rng, in, -2, 2), kGradCheckStep);
                    }});
  checks.push_back({"policy.score", [](Rng& rng) {
                      GaussianPolicy pi = random_policy(rng);
                      const Vector s = random_vector(rng, pi.state_dim());
                      const Vector a = sample(pi, s, rng).action;
                      return policy_fd(pi, score(pi, s, a),
                                       [&](const GaussianPolicy& q) { return log_prob(q, s, a); });
                    }});
  checks.push_back({"policy.reparam_vjp", [](Rng& rng) {
                      GaussianPolicy pi = random_policy(rng);
                      const Vector s = random_vector(rng, pi.state_dim());
                      Vector eps(pi.action_dim());
                      for (double& e : eps) e = rng.normal();
                      const Vector cot = random_vector(rng, pi.action_dim());
                      return policy_fd(pi, reparam_param_vjp(pi, s, eps, cot), [&](const GaussianPolicy& q) {
                        const Vector a = reparam_forward(q, s, eps);
                        double acc = 0.0;
                        for (std::size_t i = 0; i < a.size(); ++i) acc += cot[i] * a[i];
                        return acc;
                      });
                    }});
  return checks;
}

inline std::vector<GradCheckResult> run_gradchecks(const std::vector<GradCheck>& checks,
                                                   std::size_t cases, std::uint64_t seed = 0,
                                                   double tol = kGradCheckTol) {
  std::vector<GradCheckResult> out;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    Rng rng = Rng::for_stream(seed, k);
    GradCheckResult r{checks[k].name, cases, 0.0, true};
    for (std::size_t c = 0; c < cases; ++c) {
      double e = checks[k].run(rng);
      if (std::isnan(e)) e = std::numeric_limits<double>::infinity();
      r.max_rel_err = std::max(r.max_rel_err, e);
    }
    r.pass = r.max_rel_err < tol;
    out.push_back(r);
  }
  return out;
}

inline bool report_gradchecks(const std::vector<GradCheckResult>& results, std::ostream& os) {
  bool ok = true;
  for (const auto& r : results) {
    os << std::left << std::setw(24) << r.name << " cases=" << r.cases << " max_rel_err="
       << std::scientific << std::setprecision(3) << r.max_rel_err << std::defaultfloat << "  "
       << (r.pass ? "PASS" : "FAIL") << '\n';
    ok = ok && r.pass;
  }
  return ok;
}

}  // namespace pglab

#endif  // PGLAB_GRADCHECK_HPP_
