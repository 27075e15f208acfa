#ifndef PGLAB_DIFFCORE_HPP_
#define PGLAB_DIFFCORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pglab/rng.hpp"

namespace pglab {

using Vector = std::vector<double>;

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " +
                                std::to_string(want) + ")");
  }
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Flat vector of learnable parameters. Every gradient in the library is a
// ParamVector laid out exactly like the parameters it differentiates.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParamVector(Vector values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const Vector& values() const { return values_; }

  bool finite() const { return all_finite(values_); }
  double norm() const {
    return std::sqrt(std::inner_product(values_.begin(), values_.end(), values_.begin(), 0.0));
  }

  ParamVector& operator+=(const ParamVector& o) {
    require_dim(o.size(), size(), "ParamVector +=");
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ParamVector& operator-=(const ParamVector& o) {
    require_dim(o.size(), size(), "ParamVector -=");
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ParamVector& operator*=(double k) {
    for (double& x : values_) x *= k;
    return *this;
  }
  // this += k * o
  ParamVector& axpy(double k, const ParamVector& o) {
    require_dim(o.size(), size(), "ParamVector axpy");
    for (std::size_t i = 0; i < size(); ++i) values_[i] += k * o.values_[i];
    return *this;
  }

  friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
  friend ParamVector operator*(double k, ParamVector a) { return a *= k; }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  Vector values_;
};

enum class ArchKind { kLinear, kDiagonal, kMlp };

// The closed family of function approximators. Linear and MLP share one
// layered implementation (a linear map is an MLP with no hidden layers);
// diagonal is an elementwise scaling without bias.
struct Architecture {
  ArchKind kind = ArchKind::kLinear;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::size_t> hidden;

  static Architecture linear(std::size_t in, std::size_t out) {
    return {ArchKind::kLinear, in, out, {}};
  }
  static Architecture diagonal(std::size_t dim) { return {ArchKind::kDiagonal, dim, dim, {}}; }
  static Architecture mlp(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
    return {ArchKind::kMlp, in, out, std::move(hidden)};
  }

  // Layer widths from input to output (layered kinds only).
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{in};
    if (kind == ArchKind::kMlp) w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
  }

  std::size_t param_count() const {
    if (kind == ArchKind::kDiagonal) return in;
    auto w = widths();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * w[l] + w[l + 1];
    return n;
  }

  std::string describe() const {
    switch (kind) {
      case ArchKind::kLinear:
        return "linear(" + std::to_string(in) + "," + std::to_string(out) + ")";
      case ArchKind::kDiagonal:
        return "diagonal(" + std::to_string(in) + ")";
      case ArchKind::kMlp: {
        std::string s = "mlp(" + std::to_string(in) + ",[";
        for (std::size_t i = 0; i < hidden.size(); ++i) {
          s += (i ? "," : "") + std::to_string(hidden[i]);
        }
        return s + "]," + std::to_string(out) + ",tanh)";
      }
    }
    return "?";
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

class Approximator {
 public:
  Approximator() = default;
  explicit Approximator(Architecture arch)
      : arch_(std::move(arch)), params_(arch_.param_count()) {}
  Approximator(Architecture arch, ParamVector params)
      : arch_(std::move(arch)), params_(std::move(params)) {
    require_dim(params_.size(), arch_.param_count(), "Approximator params");
    if (!params_.finite()) throw std::invalid_argument("Approximator params: non-finite entry");
  }

  // Uniform(-g/sqrt(fan_in), g/sqrt(fan_in)) weights, zero biases. `output_gain`
  // scales the final layer; diagonal weights are drawn the same way with fan_in 1.
  static Approximator initialized(Architecture arch, Rng& rng, double output_gain = 1.0) {
    Approximator a(std::move(arch));
    if (a.arch_.kind == ArchKind::kDiagonal) {
      for (double& w : a.params_) w = output_gain * rng.uniform(-1.0, 1.0);
      return a;
    }
    auto w = a.arch_.widths();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const double gain = (l + 2 == w.size()) ? output_gain : 1.0;
      const double bound = gain / std::sqrt(static_cast<double>(w[l]));
      for (std::size_t k = 0; k < w[l + 1] * w[l]; ++k) a.params_[off + k] = rng.uniform(-bound, bound);
      off += w[l + 1] * w[l] + w[l + 1];
    }
    return a;
  }

  const Architecture& architecture() const { return arch_; }
  std::size_t input_size() const { return arch_.in; }
  std::size_t output_size() const { return arch_.out; }
  std::size_t param_count() const { return params_.size(); }

  const ParamVector& params() const { return params_; }
  void set_params(ParamVector p) {
    require_dim(p.size(), arch_.param_count(), "Approximator::set_params");
    if (!p.finite()) throw std::invalid_argument("Approximator::set_params: non-finite entry");
    params_ = std::move(p);
  }

 private:
  Architecture arch_;
  ParamVector params_;
};

// Activations recorded by a forward pass; consumed by backward().
struct ForwardTape {
  Vector input;
  std::vector<Vector> activations;  // post-activation output of each layer
  const Vector& output() const { return activations.back(); }
};

inline ForwardTape forward_tape(const Approximator& approx, std::span<const double> input) {
  const auto& arch = approx.architecture();
  require_dim(input.size(), arch.in, "forward");
  ForwardTape tape;
  tape.input.assign(input.begin(), input.end());
  const double* p = approx.params().data();
  if (arch.kind == ArchKind::kDiagonal) {
    Vector y(arch.in);
    for (std::size_t i = 0; i < arch.in; ++i) y[i] = p[i] * input[i];
    tape.activations.push_back(std::move(y));
    return tape;
  }
  auto w = arch.widths();
  const std::size_t layers = w.size() - 1;
  tape.activations.reserve(layers);
  const double* x = tape.input.data();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t nin = w[l], nout = w[l + 1];
    const double* W = p;
    const double* b = p + nout * nin;
    Vector y(nout);
    for (std::size_t o = 0; o < nout; ++o) {
      double acc = b[o];
      const double* row = W + o * nin;
      for (std::size_t i = 0; i < nin; ++i) acc += row[i] * x[i];
      y[o] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
    p += nout * nin + nout;
    tape.activations.push_back(std::move(y));
    x = tape.activations.back().data();
  }
  return tape;
}

inline Vector forward(const Approximator& approx, std::span<const double> input) {
  return std::move(forward_tape(approx, input).activations.back());
}

struct Gradients {
  ParamVector params;
  Vector input;
};

// Reverse-mode vector-Jacobian product: returns J_params^T c and J_input^T c.
inline Gradients backward(const Approximator& approx, const ForwardTape& tape,
                          std::span<const double> cotangent) {
  const auto& arch = approx.architecture();
  require_dim(cotangent.size(), arch.out, "backward cotangent");
  Gradients g{ParamVector(arch.param_count()), Vector(arch.in, 0.0)};
  const double* p = approx.params().data();
  if (arch.kind == ArchKind::kDiagonal) {
    for (std::size_t i = 0; i < arch.in; ++i) {
      g.params[i] = cotangent[i] * tape.input[i];
      g.input[i] = cotangent[i] * p[i];
    }
    return g;
  }
  auto w = arch.widths();
  const std::size_t layers = w.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += w[l + 1] * w[l] + w[l + 1];
  }
  Vector delta(cotangent.begin(), cotangent.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t nin = w[l], nout = w[l + 1];
    if (l + 1 < layers) {
      const Vector& h = tape.activations[l];
      for (std::size_t o = 0; o < nout; ++o) delta[o] *= 1.0 - h[o] * h[o];
    }
    const Vector& x = (l == 0) ? tape.input : tape.activations[l - 1];
    const double* W = p + offsets[l];
    double* dW = g.params.data() + offsets[l];
    double* db = dW + nout * nin;
    Vector prev(nin, 0.0);
    for (std::size_t o = 0; o < nout; ++o) {
      const double d = delta[o];
      db[o] = d;
      if (d == 0.0) continue;
      const double* row = W + o * nin;
      double* drow = dW + o * nin;
      for (std::size_t i = 0; i < nin; ++i) {
        drow[i] = d * x[i];
        prev[i] += d * row[i];
      }
    }
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

inline Gradients backward(const Approximator& approx, std::span<const double> input,
                          std::span<const double> cotangent) {
  return backward(approx, forward_tape(approx, input), cotangent);
}

inline ParamVector grad_params(const Approximator& approx, std::span<const double> input,
                               std::span<const double> cotangent) {
  return backward(approx, input, cotangent).params;
}

inline Vector grad_input(const Approximator& approx, std::span<const double> input,
                         std::span<const double> cotangent) {
  return backward(approx, input, cotangent).input;
}

// Batched passes: one column per sample. Parameter gradients are summed
// over the batch.
using Matrix = Eigen::MatrixXd;

struct BatchTape {
  Matrix input;
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

struct BatchGradients {
  ParamVector params;
  Matrix input;
};

inline Matrix columns(std::span<const Vector> xs, std::size_t rows) {
  Matrix m(rows, xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    require_dim(xs[j].size(), rows, "columns");
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = xs[j][i];
  }
  return m;
}

inline BatchTape forward_batch(const Approximator& approx, Matrix x) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& arch = approx.architecture();
  require_dim(static_cast<std::size_t>(x.rows()), arch.in, "forward_batch");
  BatchTape tape;
  tape.input = std::move(x);
  const double* p = approx.params().data();
  if (arch.kind == ArchKind::kDiagonal) {
    const Eigen::Map<const Eigen::VectorXd> w(p, arch.in);
    tape.activations.push_back(w.asDiagonal() * tape.input);
    return tape;
  }
  auto w = arch.widths();
  const std::size_t layers = w.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto nin = static_cast<Eigen::Index>(w[l]), nout = static_cast<Eigen::Index>(w[l + 1]);
    const Eigen::Map<const RowMajor> W(p, nout, nin);
    const Eigen::Map<const Eigen::VectorXd> b(p + nout * nin, nout);
    const Matrix& in = l == 0 ? tape.input : tape.activations.back();
    Matrix y = W * in;
    y.colwise() += b;
    if (l + 1 < layers) y = y.array().tanh().matrix();
    tape.activations.push_back(std::move(y));
    p += nout * nin + nout;
  }
  return tape;
}

inline BatchGradients backward_batch(const Approximator& approx, const BatchTape& tape,
                                     const Matrix& cotangent) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& arch = approx.architecture();
  require_dim(static_cast<std::size_t>(cotangent.rows()), arch.out, "backward_batch cotangent");
  require_dim(static_cast<std::size_t>(cotangent.cols()), static_cast<std::size_t>(tape.input.cols()),
              "backward_batch batch size");
  BatchGradients g{ParamVector(arch.param_count()), Matrix()};
  const double* p = approx.params().data();
  if (arch.kind == ArchKind::kDiagonal) {
    const Eigen::Map<const Eigen::VectorXd> w(p, arch.in);
    Eigen::Map<Eigen::VectorXd>(g.params.data(), arch.in) =
        cotangent.cwiseProduct(tape.input).rowwise().sum();
    g.input = w.asDiagonal() * cotangent;
    return g;
  }
  auto w = arch.widths();
  const std::size_t layers = w.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += w[l + 1] * w[l] + w[l + 1];
  }
  Matrix delta = cotangent;
  for (std::size_t l = layers; l-- > 0;) {
    const auto nin = static_cast<Eigen::Index>(w[l]), nout = static_cast<Eigen::Index>(w[l + 1]);
    if (l + 1 < layers) {
      delta.array() *= 1.0 - tape.activations[l].array().square();
    }
    const Matrix& x = l == 0 ? tape.input : tape.activations[l - 1];
    const Eigen::Map<const RowMajor> W(p + offsets[l], nout, nin);
    Eigen::Map<RowMajor>(g.params.data() + offsets[l], nout, nin).noalias() = delta * x.transpose();
    Eigen::Map<Eigen::VectorXd>(g.params.data() + offsets[l] + nout * nin, nout) = delta.rowwise().sum();
    delta = W.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

// Max relative error of the full parameter and input Jacobians against
// central differences with step h.
inline double finite_diff_check(const Approximator& approx, std::span<const double> input, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be > 0");
  const std::size_t nout = approx.output_size();
  std::vector<Gradients> rows;
  rows.reserve(nout);
  const ForwardTape tape = forward_tape(approx, input);
  for (std::size_t k = 0; k < nout; ++k) {
    Vector e(nout, 0.0);
    e[k] = 1.0;
    rows.push_back(backward(approx, tape, e));
  }
  double worst = 0.0;
  Approximator probe = approx;
  ParamVector p = approx.params();
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double orig = p[j];
    p[j] = orig + h;
    probe.set_params(p);
    Vector up = forward(probe, input);
    p[j] = orig - h;
    probe.set_params(p);
    Vector dn = forward(probe, input);
    p[j] = orig;
    for (std::size_t k = 0; k < nout; ++k) {
      worst = std::max(worst, relative_error(rows[k].params[j], (up[k] - dn[k]) / (2 * h)));
    }
  }
  Vector x(input.begin(), input.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double orig = x[j];
    x[j] = orig + h;
    Vector up = forward(approx, x);
    x[j] = orig - h;
    Vector dn = forward(approx, x);
    x[j] = orig;
    for (std::size_t k = 0; k < nout; ++k) {
      worst = std::max(worst, relative_error(rows[k].input[j], (up[k] - dn[k]) / (2 * h)));
    }
  }
  return worst;
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config) : hyper(config), m(n), v(n) {}

  AdamConfig hyper;
  ParamVector m;
  ParamVector v;
  long step = 0;
};

// Bias-corrected Adam; descends along `grad`.
inline void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state) {
  require_dim(grad.size(), params.size(), "adam_step grad");
  require_dim(state.m.size(), params.size(), "adam_step state");
  if (!grad.finite()) throw std::invalid_argument("adam_step: non-finite gradient");
  const auto& h = state.hyper;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * grad[i];
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

inline void adam_step(Approximator& approx, const ParamVector& grad, AdamState& state) {
  ParamVector p = approx.params();
  adam_step(p, grad, state);
  approx.set_params(std::move(p));
}

}  // namespace pglab

#endif  // PGLAB_DIFFCORE_HPP_
