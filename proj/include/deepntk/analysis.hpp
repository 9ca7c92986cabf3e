#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "linalg.hpp"

namespace deepntk::analysis {

// smooth switch rising from 0 at z = -1 to 1 at z = +1, flat to all orders at
// the boundary; the boundary values are part of the definition, not limits
inline double psi(double d, double z) {
  if (!(d > 0.0)) throw DomainError("psi needs d > 0, got " + io::format_double(d));
  z = kernels::clamp_correlation(z);
  if (z >= 1.0) return 1.0;
  if (z <= -1.0) return 0.0;
  // exp may overflow to inf for small d; 1/(1 + inf) = 0 is the correct limit
  return 1.0 / (1.0 + std::exp(-2.0 * z / (d * (1.0 - z * z))));
}

// everything a depth sweep observes about one kernel family on one dataset
// and one probe point; raw kernel values are kept for plotting, while the
// determinant and coefficient diagnostics use the normalized matrix
struct DepthTrace {
  std::string kernel_name;
  std::vector<int> depths;                  // 1..L_max
  std::vector<Eigen::MatrixXd> kernels;     // raw kernel values among the dataset points
  std::vector<Eigen::VectorXd> probe_rows;  // raw kernel values between the probe and each point
  std::vector<linalg::LogDet> logdets;      // of the normalized kernel matrix
  std::vector<bool> singular;               // normalized matrix numerically singular at this depth
  std::vector<Eigen::VectorXd> coeffs;      // v solving K_norm v = k_norm_probe; empty when singular
  std::vector<double> coeff_norms;          // |v|_2, NaN when singular
  std::vector<double> coeff_diffs;          // |v at next depth - v here|_2, NaN at the last depth
};

inline DepthTrace depth_sweep(const kernels::KernelSequence& seq, const geometry::SphereDataset& ds,
                              const Eigen::VectorXd& probe, int L_max) {
  if (L_max < 2) throw std::invalid_argument("L_max must be >= 2");
  Eigen::Index n = ds.size();
  Eigen::MatrixXd g = geometry::gram(ds);
  Eigen::VectorXd gx = geometry::gram_row(ds, probe);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  DepthTrace trace;
  trace.kernel_name = seq.name;

  std::vector<kernels::SeqState> states(static_cast<std::size_t>(n * n));
  std::vector<kernels::SeqState> probe_states(static_cast<std::size_t>(n));
  Eigen::MatrixXd raw(n, n), normalized(n, n);
  Eigen::VectorXd raw_row(n), normalized_row(n);

  for (int depth = 1; depth <= L_max; ++depth) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        kernels::SeqState& s = states[static_cast<std::size_t>(i * n + j)];
        s = depth == 1 ? seq.init(g(i, j)) : seq.step(s, depth - 1);
        raw(i, j) = s.value;
        normalized(i, j) = seq.normalize(s.value, depth);
      }
      kernels::SeqState& p = probe_states[static_cast<std::size_t>(i)];
      p = depth == 1 ? seq.init(gx(i)) : seq.step(p, depth - 1);
      raw_row(i) = p.value;
      normalized_row(i) = seq.normalize(p.value, depth);
    }

    trace.depths.push_back(depth);
    trace.kernels.push_back(raw);
    trace.probe_rows.push_back(raw_row);
    trace.logdets.push_back(linalg::log_det_sym(normalized));

    // fresh symmetric solve at every depth; numerical failure is recorded and
    // the sweep keeps going, since near-singular deep kernels are expected
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normalized);
    if (es.info() != Eigen::Success || linalg::is_singular(es.eigenvalues())) {
      trace.singular.push_back(true);
      trace.coeffs.emplace_back();
      trace.coeff_norms.push_back(nan);
    } else {
      trace.singular.push_back(false);
      Eigen::VectorXd v = es.eigenvectors() *
                          (es.eigenvectors().transpose() * normalized_row).cwiseQuotient(es.eigenvalues());
      trace.coeff_norms.push_back(v.norm());
      trace.coeffs.push_back(std::move(v));
    }
  }

  for (std::size_t k = 0; k + 1 < trace.coeffs.size(); ++k)
    trace.coeff_diffs.push_back(trace.coeffs[k].size() > 0 && trace.coeffs[k + 1].size() > 0
                                    ? (trace.coeffs[k + 1] - trace.coeffs[k]).norm()
                                    : nan);
  trace.coeff_diffs.push_back(nan);
  return trace;
}

// observable content of the bounded-coefficients claim: v = K^{-1} k_probe
// stays componentwise bounded and |v|_2 grows at most linearly in n
struct BoundReport {
  int depth;
  Eigen::VectorXd probe_max_component;  // per probe, the largest component of v
  Eigen::VectorXd probe_norms;          // per probe, |v|_2
  double max_component;                 // empirical bound over the probe set
  double max_norm;
  std::vector<Eigen::Index> subset_sizes;  // leading nested subsets of the dataset
  std::vector<double> norm_per_point;      // max over probes of |v|_2 / subset size
};

inline BoundReport rde_bound_check(const geometry::SphereDataset& ds, const std::vector<Eigen::VectorXd>& probes,
                                   int depth) {
  if (depth < 2) throw std::invalid_argument("depth must be >= 2");
  if (probes.empty()) throw std::invalid_argument("need at least one probe");
  if (ds.size() < 2) throw std::invalid_argument("need at least two dataset points");
  Eigen::Index n = ds.size();
  Eigen::MatrixXd g = geometry::gram(ds);

  BoundReport report;
  report.depth = depth;
  report.probe_max_component.resize(static_cast<Eigen::Index>(probes.size()));
  report.probe_norms.resize(static_cast<Eigen::Index>(probes.size()));

  std::vector<Eigen::Index> sizes;
  for (Eigen::Index m : {n / 4, n / 2, n})
    if (m >= 2 && (sizes.empty() || m > sizes.back())) sizes.push_back(m);
  report.subset_sizes = sizes;
  report.norm_per_point.assign(sizes.size(), 0.0);

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    Eigen::Index m = sizes[si];
    Eigen::MatrixXd k = kernels::theta_bar(g.topLeftCorner(m, m), depth).entries;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success || linalg::is_singular(es.eigenvalues()))
      throw SingularKernelError(es.eigenvalues()(0));

    for (std::size_t pi = 0; pi < probes.size(); ++pi) {
      Eigen::VectorXd gx = geometry::gram_row(ds, probes[pi]).head(m);
      Eigen::VectorXd kx(m);
      for (Eigen::Index i = 0; i < m; ++i) kx(i) = kernels::theta_bar_at_depth(gx(i), depth);
      Eigen::VectorXd v =
          es.eigenvectors() * (es.eigenvectors().transpose() * kx).cwiseQuotient(es.eigenvalues());
      double norm = v.norm();
      report.norm_per_point[si] = std::max(report.norm_per_point[si], norm / static_cast<double>(m));
      if (m == n) {
        report.probe_max_component(static_cast<Eigen::Index>(pi)) = v.maxCoeff();
        report.probe_norms(static_cast<Eigen::Index>(pi)) = norm;
      }
    }
  }

  report.max_component = report.probe_max_component.maxCoeff();
  report.max_norm = report.probe_norms.maxCoeff();
  return report;
}

namespace detail {

inline std::string csv_value(double v) {
  return std::isfinite(v) ? io::format_double(v) : std::string("singular");
}

}  // namespace detail

// rows are kind,i,j,L,value: kernel entries as value,i,j; probe entries as
// probe,-1,j; per-depth scalars with i = j = -1
inline void write_trace_csv(const DepthTrace& trace, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "kind,i,j,L,value\n";
  for (std::size_t k = 0; k < trace.depths.size(); ++k) {
    int depth = trace.depths[k];
    const Eigen::MatrixXd& m = trace.kernels[k];
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i; j < m.cols(); ++j)
        out << "value," << i << ',' << j << ',' << depth << ',' << io::format_double(m(i, j)) << '\n';
    for (Eigen::Index j = 0; j < trace.probe_rows[k].size(); ++j)
      out << "probe,-1," << j << ',' << depth << ',' << io::format_double(trace.probe_rows[k](j)) << '\n';
    out << "logdet,-1,-1," << depth << ','
        << (trace.logdets[k].sign > 0 ? detail::csv_value(trace.logdets[k].log_abs) : std::string("singular"))
        << '\n';
    out << "coeffnorm,-1,-1," << depth << ',' << detail::csv_value(trace.coeff_norms[k]) << '\n';
    if (k + 1 < trace.depths.size())
      out << "coeffdiff,-1,-1," << depth << ',' << detail::csv_value(trace.coeff_diffs[k]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline void write_criteria_csv(const kernels::CriteriaReport& report, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "kind,i,j,L,value\n";
  for (const auto& row : report.per_depth) {
    out << "dominance,-1,-1," << row.depth << ',' << io::format_double(row.dominance_violation) << '\n';
    out << "mineig,-1,-1," << row.depth << ',' << io::format_double(row.min_eigenvalue) << '\n';
    out << "logdet,-1,-1," << row.depth << ','
        << (row.logdet_sign > 0 ? detail::csv_value(row.logdet) : std::string("singular")) << '\n';
    out << "pd,-1,-1," << row.depth << ',' << (row.positive_definite ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string render_criteria_text(const kernels::CriteriaReport& report) {
  std::string text = "kernel family: " + report.kernel_name + "\n";
  text += "  L   dominance_violation   min_eigenvalue   log_det   positive_definite\n";
  for (const auto& row : report.per_depth) {
    text += "  " + std::to_string(row.depth) + "   " + io::format_double(row.dominance_violation) + "   " +
            io::format_double(row.min_eigenvalue) + "   " +
            (row.logdet_sign > 0 ? detail::csv_value(row.logdet) : std::string("singular")) + "   " +
            (row.positive_definite ? "yes" : "no") + "\n";
  }
  text += report.first_stable_pd_depth > 0
              ? "  positive definite from depth " + std::to_string(report.first_stable_pd_depth) +
                    " through " + std::to_string(report.per_depth.back().depth) + "\n"
              : "  no depth from which the family stays positive definite\n";
  return text;
}

}  // namespace deepntk::analysis
