#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "errors.hpp"
#include "kernels.hpp"
#include "linalg.hpp"

namespace deepntk::regression {

// shared spectral data of one kernel matrix: the infinite-time predictor needs
// kernel^{-1}, the early-stopped one needs the full spectrum, so both are
// served by a single symmetric eigendecomposition
struct RegressionSolution {
  Eigen::VectorXd alpha;         // kernel^{-1} (y_star - y0)
  Eigen::VectorXd eigenvalues;   // descending, all positive
  Eigen::MatrixXd eigenvectors;  // columns aligned with the eigenvalues
  Eigen::VectorXd residual0;     // y0 - y_star
  Eigen::VectorXd f0_train;      // y0
  double condition_number;
};

inline RegressionSolution fit(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y_star,
                              const Eigen::VectorXd& y0) {
  Eigen::Index n = kernel.rows();
  if (kernel.cols() != n) throw DimensionMismatchError("kernel matrix must be square");
  if (y_star.size() != n || y0.size() != n)
    throw DimensionMismatchError("label vectors must match the kernel size");
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("kernel matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  if (linalg::is_singular(es.eigenvalues())) throw SingularKernelError(es.eigenvalues()(0));

  RegressionSolution sol;
  sol.eigenvalues = es.eigenvalues().reverse();
  sol.eigenvectors = es.eigenvectors().rowwise().reverse();
  sol.residual0 = y0 - y_star;
  sol.f0_train = y0;
  sol.alpha = sol.eigenvectors *
              (sol.eigenvectors.transpose() * (y_star - y0)).cwiseQuotient(sol.eigenvalues);
  sol.condition_number = sol.eigenvalues(0) / sol.eigenvalues(n - 1);
  return sol;
}

inline RegressionSolution fit(const kernels::KernelMatrix& kernel, const Eigen::VectorXd& y_star,
                              const Eigen::VectorXd& y0) {
  return fit(kernel.entries, y_star, y0);
}

// infinite-time kernel regression readout at one test point
inline double predict_infinity(const RegressionSolution& sol, const Eigen::VectorXd& kx, double f0_x) {
  if (kx.size() != sol.alpha.size()) throw DimensionMismatchError("kernel row length does not match fit");
  return f0_x + kx.dot(sol.alpha);
}

// time-tau readout of kernel gradient flow: each eigenmode is attenuated by
// (exp(-lambda tau) - 1) / lambda, which recovers predict_infinity as tau
// grows and the initial output at tau = 0
inline double predict_tau(const RegressionSolution& sol, const Eigen::VectorXd& kx, double f0_x, double tau) {
  if (kx.size() != sol.alpha.size()) throw DimensionMismatchError("kernel row length does not match fit");
  if (tau < 0.0) throw DomainError("tau must be nonnegative");
  Eigen::VectorXd w = sol.eigenvectors.transpose() * sol.residual0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) *= std::expm1(-sol.eigenvalues(i) * tau) / sol.eigenvalues(i);
  return f0_x + kx.dot(sol.eigenvectors * w);
}

}  // namespace deepntk::regression
