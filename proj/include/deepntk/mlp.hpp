#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace deepntk::finitewidth {

// bias-free fully connected ReLU network; every pre-activation carries a
// 1/sqrt(fan-in) factor with standard normal weights, the parameterization
// under which the tangent kernel has a deterministic width limit
struct MLPNetwork {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] maps layer l to layer l+1
  std::uint64_t seed = 0;

  int depth() const { return static_cast<int>(weights.size()); }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index min_hidden_width() const {
    Eigen::Index w = -1;
    for (std::size_t l = 0; l + 1 < weights.size(); ++l)
      if (w < 0 || weights[l].rows() < w) w = weights[l].rows();
    return w;
  }
};

// widths n0 -> hidden... -> 1; each layer draws from its own counter stream
inline MLPNetwork make_network(Eigen::Index n0, const std::vector<Eigen::Index>& hidden, std::uint64_t seed) {
  if (n0 < 1) throw std::invalid_argument("input dimension must be >= 1");
  std::vector<Eigen::Index> dims{n0};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);

  MLPNetwork net;
  net.seed = seed;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l + 1] < 1) throw std::invalid_argument("layer widths must be >= 1");
    Rng rng(seed, l);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.gaussian();
    net.weights.push_back(std::move(w));
  }
  return net;
}

namespace detail {

inline double relu(double v) { return v > 0.0 ? v : 0.0; }
inline double relu_prime(double v) { return v > 0.0 ? 1.0 : 0.0; }  // derivative at 0 fixed to 0

}  // namespace detail

// activations and output-gradients that factor the parameter gradient:
// d f / d W_l = deltas[l] * activations[l]^T / sqrt(n_l)
struct GradientTrace {
  std::vector<Eigen::VectorXd> activations;  // layer inputs a_0 .. a_{D-1}
  std::vector<Eigen::VectorXd> deltas;       // d f / d pre-activation of each layer
  double output = 0.0;
};

inline GradientTrace gradient_trace(const MLPNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim())
    throw DimensionMismatchError("input has " + std::to_string(x.size()) + " coordinates, network expects " +
                                 std::to_string(net.input_dim()));
  int d = net.depth();
  GradientTrace t;
  t.activations.resize(static_cast<std::size_t>(d));
  t.deltas.resize(static_cast<std::size_t>(d));

  std::vector<Eigen::VectorXd> pre(static_cast<std::size_t>(d));
  Eigen::VectorXd a = x;
  for (int l = 0; l < d; ++l) {
    t.activations[static_cast<std::size_t>(l)] = a;
    double scale = 1.0 / std::sqrt(static_cast<double>(a.size()));
    pre[static_cast<std::size_t>(l)] = scale * (net.weights[static_cast<std::size_t>(l)] * a);
    a = l + 1 < d ? pre[static_cast<std::size_t>(l)].unaryExpr([](double v) { return detail::relu(v); })
                  : pre[static_cast<std::size_t>(l)];
  }
  t.output = a(0);

  Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
  t.deltas[static_cast<std::size_t>(d - 1)] = delta;
  for (int l = d - 2; l >= 0; --l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(t.activations[static_cast<std::size_t>(l + 1)].size()));
    delta = scale * (net.weights[static_cast<std::size_t>(l + 1)].transpose() * delta);
    delta = delta.cwiseProduct(
        pre[static_cast<std::size_t>(l)].unaryExpr([](double v) { return detail::relu_prime(v); }));
    t.deltas[static_cast<std::size_t>(l)] = delta;
  }
  return t;
}

inline double forward(const MLPNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim())
    throw DimensionMismatchError("input has " + std::to_string(x.size()) + " coordinates, network expects " +
                                 std::to_string(net.input_dim()));
  int d = net.depth();
  Eigen::VectorXd a = x;
  for (int l = 0; l < d; ++l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(a.size()));
    Eigen::VectorXd z = scale * (net.weights[static_cast<std::size_t>(l)] * a);
    a = l + 1 < d ? z.unaryExpr([](double v) { return detail::relu(v); }) : z;
  }
  return a(0);
}

inline Eigen::VectorXd forward_batch(const MLPNetwork& net, const Eigen::MatrixXd& points) {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = forward(net, points.row(i).transpose());
  return out;
}

inline std::vector<Eigen::MatrixXd> parameter_gradients(const MLPNetwork& net, const Eigen::VectorXd& x) {
  GradientTrace t = gradient_trace(net, x);
  std::vector<Eigen::MatrixXd> grads;
  for (int l = 0; l < net.depth(); ++l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(t.activations[static_cast<std::size_t>(l)].size()));
    grads.push_back(scale * t.deltas[static_cast<std::size_t>(l)] *
                    t.activations[static_cast<std::size_t>(l)].transpose());
  }
  return grads;
}

struct EmpiricalNTK {
  Eigen::MatrixXd entries;
  Eigen::Index width;  // smallest hidden width, -1 for a linear network
  int seed_count = 1;
};

// tangent kernel at the current parameters: entry (i, j) is the inner product
// of the parameter gradients at points i and j. Each gradient is rank one per
// layer, so the Frobenius inner products reduce to
// (delta_i . delta_j)(a_i . a_j) / n_l without forming any outer product.
inline EmpiricalNTK empirical_ntk(const MLPNetwork& net, const Eigen::MatrixXd& points) {
  Eigen::Index n = points.rows();
  std::vector<GradientTrace> traces;
  traces.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) traces.push_back(gradient_trace(net, points.row(i).transpose()));

  Eigen::MatrixXd entries(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      double v = 0.0;
      for (int l = 0; l < net.depth(); ++l) {
        auto ls = static_cast<std::size_t>(l);
        double fan_in = static_cast<double>(traces[static_cast<std::size_t>(i)].activations[ls].size());
        v += traces[static_cast<std::size_t>(i)].deltas[ls].dot(traces[static_cast<std::size_t>(j)].deltas[ls]) *
             traces[static_cast<std::size_t>(i)].activations[ls].dot(
                 traces[static_cast<std::size_t>(j)].activations[ls]) /
             fan_in;
      }
      entries(i, j) = v;
      entries(j, i) = v;
    }
  return {std::move(entries), net.min_hidden_width(), 1};
}

// average over independent initializations, accumulated in seed order
inline EmpiricalNTK empirical_ntk_averaged(Eigen::Index n0, const std::vector<Eigen::Index>& hidden,
                                           const Eigen::MatrixXd& points, int num_seeds, std::uint64_t seed) {
  if (num_seeds < 1) throw std::invalid_argument("need at least one seed");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(points.rows(), points.rows());
  Eigen::Index width = -1;
  for (int s = 0; s < num_seeds; ++s) {
    MLPNetwork net = make_network(n0, hidden, Rng(seed, 0x4e74 + static_cast<std::uint64_t>(s)).next_u64());
    EmpiricalNTK k = empirical_ntk(net, points);
    sum += k.entries;
    width = k.width;
  }
  return {sum / num_seeds, width, num_seeds};
}

struct TrainResult {
  MLPNetwork net;
  std::vector<double> losses;  // half squared error; losses[k] is before step k, plus a final entry
  double ntk_lambda_max = 0.0;
  bool stability_warning = false;  // lr * lambda_max at initialization >= 2
};

// full-batch gradient descent on sum_i (f(x_i) - y_i)^2 / 2
inline TrainResult train_gd(const MLPNetwork& net, const Eigen::MatrixXd& points, const Eigen::VectorXd& labels,
                            int steps, double lr) {
  if (labels.size() != points.rows()) throw DimensionMismatchError("label count does not match point count");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");

  TrainResult result{net, {}, 0.0, false};
  Eigen::Index n = points.rows();

  Eigen::VectorXd ntk_eigs = linalg::sym_eigenvalues(empirical_ntk(result.net, points).entries);
  result.ntk_lambda_max = ntk_eigs(n - 1);
  result.stability_warning = lr * result.ntk_lambda_max >= 2.0;

  for (int step = 0; step <= steps; ++step) {
    std::vector<GradientTrace> traces;
    traces.reserve(static_cast<std::size_t>(n));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      traces.push_back(gradient_trace(result.net, points.row(i).transpose()));
      double r = traces.back().output - labels(i);
      loss += 0.5 * r * r;
    }
    if (!std::isfinite(loss)) throw NonFiniteLossError(step);
    result.losses.push_back(loss);
    if (step == steps) break;

    for (int l = 0; l < result.net.depth(); ++l) {
      auto ls = static_cast<std::size_t>(l);
      Eigen::MatrixXd& w = result.net.weights[ls];
      Eigen::MatrixXd d(w.rows(), n);
      Eigen::MatrixXd a(w.cols(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const GradientTrace& t = traces[static_cast<std::size_t>(i)];
        double r = t.output - labels(i);
        d.col(i) = (lr * r / std::sqrt(static_cast<double>(w.cols()))) * t.deltas[ls];
        a.col(i) = t.activations[ls];
      }
      w.noalias() -= d * a.transpose();  // summed rank-one updates as one product
    }
  }
  return result;
}

}  // namespace deepntk::finitewidth
