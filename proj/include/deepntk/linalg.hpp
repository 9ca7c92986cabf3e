#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace deepntk::linalg {

struct LogDet {
  int sign;        // -1, 0, +1
  double log_abs;  // log |det|; -inf when the sign is 0
};

// (sign, log |det|) from a pivoted LDL^T factorization; determinants of the
// deep kernel matrices underflow long before log det becomes uninformative
inline LogDet log_det_sym(const Eigen::MatrixXd& m) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  Eigen::VectorXd d = ldlt.vectorD();
  int sign = 1;
  double log_abs = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) == 0.0 || !std::isfinite(d(i))) return {0, -std::numeric_limits<double>::infinity()};
    if (d(i) < 0.0) sign = -sign;
    log_abs += std::log(std::abs(d(i)));
  }
  if (ldlt.info() != Eigen::Success) return {0, -std::numeric_limits<double>::infinity()};
  return {sign, log_abs};
}

// eigenvalues of a symmetric matrix, ascending
inline Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// a kernel matrix counts as singular when its spectrum does not clear the
// rounding floor n * eps * lambda_max
inline double singular_threshold(Eigen::Index n, double lambda_max) {
  return static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lambda_max;
}

inline bool is_singular(const Eigen::VectorXd& eigenvalues_ascending) {
  Eigen::Index n = eigenvalues_ascending.size();
  double lo = eigenvalues_ascending(0);
  double hi = eigenvalues_ascending(n - 1);
  return !(lo > singular_threshold(n, hi));
}

// strict positive definiteness: a Cholesky factorization must succeed and the
// spectrum must clear the singularity floor
inline bool positive_definite(const Eigen::MatrixXd& m, const Eigen::VectorXd& eigenvalues_ascending) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success && !is_singular(eigenvalues_ascending);
}

}  // namespace deepntk::linalg
