#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace deepntk::kernels {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// correlations live in [-1, 1]; rounding spill up to 1e-9 is clamped, anything
// further is treated as a logic bug upstream
inline double clamp_correlation(double z) {
  if (!(std::abs(z) <= 1.0 + 1e-9))
    throw DomainError("correlation " + std::to_string(z) + " outside [-1, 1]");
  return z < -1.0 ? -1.0 : (z > 1.0 ? 1.0 : z);
}

// advances the correlation of a neuron pair across one ReLU layer
inline double h_arc(double z) {
  z = clamp_correlation(z);
  return z * std::asin(z) / kPi + std::sqrt(1.0 - z * z) / kPi + 0.5 * z;
}

inline double h_arc_prime(double z) {
  z = clamp_correlation(z);
  return std::asin(z) / kPi + 0.5;
}

// derivative-kernel factor for one layer; exactly half of h_arc_prime
inline double sigma_dot(double rho_prev) { return 0.5 * h_arc_prime(rho_prev); }

// (depth - 1)-fold composition of h_arc starting from an inner product
inline double rho_at_depth(double z0, int depth) {
  double rho = clamp_correlation(z0);
  for (int l = 1; l < depth; ++l) rho = h_arc(rho);
  return rho;
}

struct ScalarKernelState {
  double rho;        // correlation at the current depth
  double theta_bar;  // normalized tangent kernel value at the current depth
  int depth;
};

inline ScalarKernelState theta_bar_step(const ScalarKernelState& s) {
  double l = s.depth;
  double next_rho = h_arc(s.rho);
  double next_bar = l / (l + 1.0) * h_arc_prime(s.rho) * s.theta_bar + next_rho / (l + 1.0);
  return {next_rho, next_bar, s.depth + 1};
}

inline double theta_bar_at_depth(double z0, int depth) {
  double z = clamp_correlation(z0);
  ScalarKernelState s{z, z, 1};
  while (s.depth < depth) s = theta_bar_step(s);
  return s.theta_bar;
}

// squared-sigmoid map whose unique positive fixed point is the depth limit of
// the eta family
inline double eta_step(double z) {
  double t = 1.0 + std::exp(-z);
  return 1.0 / (t * t);
}

inline double eta_at_depth(double z0, int depth) {
  double v = clamp_correlation(z0);
  for (int l = 1; l < depth; ++l) v = eta_step(v);
  return v;
}

inline double theta_infty_value(double z0, int depth, int n0) {
  double rho = clamp_correlation(z0);
  double theta = rho / n0;
  for (int l = 1; l < depth; ++l) {
    double sd = sigma_dot(rho);
    rho = h_arc(rho);
    theta = sd * theta + rho * std::ldexp(1.0 / n0, -l);
  }
  return theta;
}

enum class KernelKind { theta_infty, theta_bar, rho, eta };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::theta_infty: return "theta_infty";
    case KernelKind::theta_bar: return "theta_bar";
    case KernelKind::rho: return "rho";
    default: return "eta";
  }
}

inline KernelKind kind_from_name(std::string_view name) {
  if (name == "theta_infty") return KernelKind::theta_infty;
  if (name == "theta_bar") return KernelKind::theta_bar;
  if (name == "rho") return KernelKind::rho;
  if (name == "eta") return KernelKind::eta;
  throw std::invalid_argument("unknown kernel kind '" + std::string(name) + "'");
}

struct KernelMatrix {
  Eigen::MatrixXd entries;
  int depth;
  KernelKind kind;
};

namespace detail {

inline Eigen::MatrixXd clamped(const Eigen::MatrixXd& gram) {
  if (gram.rows() != gram.cols()) throw DimensionMismatchError("gram matrix must be square");
  return gram.unaryExpr([](double z) { return clamp_correlation(z); });
}

}  // namespace detail

// absolute-scale tangent kernel on sphere data, by the layer recursion
// theta <- sigma_dot * theta + sigma with sigma tracked in closed form
inline KernelMatrix theta_infty(const Eigen::MatrixXd& gram, int depth, int n0) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (n0 < 1) throw std::invalid_argument("n0 must be >= 1");
  Eigen::MatrixXd rho = detail::clamped(gram);
  Eigen::MatrixXd theta = rho / n0;
  for (int l = 1; l < depth; ++l) {
    Eigen::MatrixXd sd = rho.unaryExpr([](double z) { return sigma_dot(z); });
    rho = rho.unaryExpr([](double z) { return h_arc(z); });
    theta = sd.cwiseProduct(theta) + rho * std::ldexp(1.0 / n0, -l);
  }
  return {std::move(theta), depth, KernelKind::theta_infty};
}

// general (off-sphere) points enter through homogeneity: the kernel of the
// normalized points is scaled back by the norms
inline KernelMatrix theta_infty(const Eigen::MatrixXd& gram_normalized, int depth, int n0,
                                const Eigen::VectorXd& norms) {
  if (norms.size() != gram_normalized.rows())
    throw DimensionMismatchError("norms length does not match gram size");
  KernelMatrix k = theta_infty(gram_normalized, depth, n0);
  k.entries = k.entries.cwiseProduct(norms * norms.transpose());
  return k;
}

// normalized tangent kernel, unit diagonal on sphere data; runs the
// depth-normalized recursion directly so no n0 or power of two ever enters
inline KernelMatrix theta_bar(const Eigen::MatrixXd& gram, int depth) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  Eigen::MatrixXd rho = detail::clamped(gram);
  Eigen::MatrixXd bar = rho;
  for (int l = 1; l < depth; ++l) {
    Eigen::MatrixXd hp = rho.unaryExpr([](double z) { return h_arc_prime(z); });
    rho = rho.unaryExpr([](double z) { return h_arc(z); });
    bar = (l / (l + 1.0)) * hp.cwiseProduct(bar) + rho / (l + 1.0);
  }
  return {std::move(bar), depth, KernelKind::theta_bar};
}

inline KernelMatrix rho_matrix(const Eigen::MatrixXd& gram, int depth) {
  Eigen::MatrixXd m = detail::clamped(gram);
  for (int l = 1; l < depth; ++l) m = m.unaryExpr([](double z) { return h_arc(z); });
  return {std::move(m), depth, KernelKind::rho};
}

inline KernelMatrix eta_matrix(const Eigen::MatrixXd& gram, int depth) {
  Eigen::MatrixXd m = detail::clamped(gram);
  for (int l = 1; l < depth; ++l) m = m.unaryExpr([](double z) { return eta_step(z); });
  return {std::move(m), depth, KernelKind::eta};
}

// a depth-indexed kernel family: value at depth 1 from an inner product, a
// step to the next depth, and the per-depth normalization that gives the
// matrix used for determinant and solve diagnostics
struct SeqState {
  double value;
  double aux;  // companion correlation where the step needs one
};

struct KernelSequence {
  std::string name;
  std::function<SeqState(double)> init;
  std::function<SeqState(const SeqState&, int)> step;  // depth of the incoming state
  std::function<double(double, int)> normalize;        // (raw value, depth) -> normalized value
};

inline KernelSequence theta_bar_sequence() {
  return {"theta_bar",
          [](double z) { z = clamp_correlation(z); return SeqState{z, z}; },
          [](const SeqState& s, int depth) {
            ScalarKernelState t = theta_bar_step({s.aux, s.value, depth});
            return SeqState{t.theta_bar, t.rho};
          },
          [](double v, int) { return v; }};
}

inline KernelSequence rho_sequence() {
  return {"rho",
          [](double z) { return SeqState{clamp_correlation(z), 0.0}; },
          [](const SeqState& s, int) { return SeqState{h_arc(s.value), 0.0}; },
          [](double v, int) { return v; }};
}

inline KernelSequence eta_sequence() {
  return {"eta",
          [](double z) { return SeqState{clamp_correlation(z), 0.0}; },
          [](const SeqState& s, int) { return SeqState{eta_step(s.value), 0.0}; },
          // the on-sphere diagonal is the iterate from 1, not 1 itself
          [](double v, int depth) { return v / eta_at_depth(1.0, depth); }};
}

inline KernelSequence sequence_for(KernelKind kind) {
  switch (kind) {
    case KernelKind::theta_bar: return theta_bar_sequence();
    case KernelKind::rho: return rho_sequence();
    case KernelKind::eta: return eta_sequence();
    default: throw std::invalid_argument("no depth sequence for kernel kind theta_infty");
  }
}

inline double sequence_value(const KernelSequence& seq, double z, int depth) {
  SeqState s = seq.init(z);
  for (int l = 1; l < depth; ++l) s = seq.step(s, l);
  return s.value;
}

inline Eigen::MatrixXd sequence_matrix(const KernelSequence& seq, const Eigen::MatrixXd& gram, int depth) {
  Eigen::MatrixXd out = gram;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = 0; j < gram.cols(); ++j) out(i, j) = sequence_value(seq, gram(i, j), depth);
  return out;
}

inline Eigen::VectorXd sequence_row(const KernelSequence& seq, const Eigen::VectorXd& gram_row, int depth) {
  Eigen::VectorXd out = gram_row;
  for (Eigen::Index i = 0; i < gram_row.size(); ++i) out(i) = sequence_value(seq, gram_row(i), depth);
  return out;
}

struct DepthCriteria {
  int depth;
  double dominance_violation;  // max off-diagonal minus min diagonal; <= 0 means dominance holds
  double min_eigenvalue;       // smallest eigenvalue of the normalized matrix
  int logdet_sign;
  double logdet;
  bool positive_definite;
};

struct CriteriaReport {
  std::string kernel_name;
  std::vector<DepthCriteria> per_depth;  // depths 1..L_max
  int first_stable_pd_depth;             // smallest L with L..L_max all positive definite; -1 if none
};

// per-depth diagnostics for the properties a kernel family must satisfy for
// the depth limit of the regression coefficients: diagonal dominance,
// eventual positive definiteness, vanishing normalized determinant
inline CriteriaReport kernel_criteria_check(const KernelSequence& seq, const Eigen::MatrixXd& gram, int L_max) {
  if (L_max < 2) throw std::invalid_argument("L_max must be >= 2");
  Eigen::Index n = gram.rows();
  std::vector<SeqState> states(static_cast<std::size_t>(n * n));

  CriteriaReport report{seq.name, {}, -1};
  Eigen::MatrixXd normalized(n, n);
  for (int depth = 1; depth <= L_max; ++depth) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        SeqState& s = states[static_cast<std::size_t>(i * n + j)];
        s = depth == 1 ? seq.init(gram(i, j)) : seq.step(s, depth - 1);
        normalized(i, j) = seq.normalize(s.value, depth);
      }

    double min_diag = normalized.diagonal().minCoeff();
    double max_off = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && normalized(i, j) > max_off) max_off = normalized(i, j);

    Eigen::VectorXd eigs = linalg::sym_eigenvalues(normalized);
    linalg::LogDet ld = linalg::log_det_sym(normalized);
    report.per_depth.push_back({depth, n > 1 ? max_off - min_diag : 0.0, eigs(0), ld.sign, ld.log_abs,
                                linalg::positive_definite(normalized, eigs)});
  }

  for (int depth = L_max; depth >= 1 && report.per_depth[static_cast<std::size_t>(depth - 1)].positive_definite;
       --depth)
    report.first_stable_pd_depth = depth;
  return report;
}

}  // namespace deepntk::kernels
