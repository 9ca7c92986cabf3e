// Acceptance gate: ten numbered checks, each printing one PASS/FAIL line.
// Run with no arguments for the full gate, or with a single number to run
// one check. The exit code is the number of failed checks.
#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "deepntk/deepntk.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace deepntk;

namespace frozen {

// Recorded from the first seeded run of this binary; later runs must
// reproduce them bit-for-bit (hashes) or to the stated tolerance.
constexpr double kLogDetFloor = -1.5044648355562469;
constexpr double kMaxCoefficientComponent = 0.12876875484314385;
constexpr std::uint64_t kTraceCsvHash[3] = {0x35a98f2f398d03cbULL, 0xcc4290a939ff9ed9ULL,
                                            0x8ae7485d8455ceabULL};  // theta_bar, rho, eta
constexpr std::uint64_t kTracePlotHash = 0xc6512edba87ab42eULL;

}  // namespace frozen

namespace {

std::string fmt(double v) { return io::format_double(v); }

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

bool check_constants(std::string& detail) {
  struct Identity {
    const char* name;
    double got, want;
  };
  const Identity identities[] = {
      {"h(1)", kernels::h_arc(1.0), 1.0},
      {"h(-1)", kernels::h_arc(-1.0), 0.0},
      {"h(0)", kernels::h_arc(0.0), 1.0 / kernels::kPi},
      {"h'(0)", kernels::h_arc_prime(0.0), 0.5},
      {"sigma_dot(1)", kernels::sigma_dot(1.0), 0.5},
      {"psi(0.7,1)", analysis::psi(0.7, 1.0), 1.0},
      {"psi(0.7,-1)", analysis::psi(0.7, -1.0), 0.0},
      {"psi(3,1)", analysis::psi(3.0, 1.0), 1.0},
      {"psi(3,-1)", analysis::psi(3.0, -1.0), 0.0},
  };
  double worst = 0.0;
  const char* worst_name = identities[0].name;
  for (const auto& id : identities) {
    double err = std::abs(id.got - id.want);
    if (err > worst) {
      worst = err;
      worst_name = id.name;
    }
  }
  detail = "9 identities, largest error " + fmt(worst) + " (" + worst_name + "), tolerance 1e-14";
  return worst <= 1e-14;
}

bool check_diagonal(std::string& detail) {
  Rng rng(2);
  geometry::SphereDataset ds = geometry::synthetic_sphere(16, 8, geometry::Projection::canonical, rng);
  Eigen::MatrixXd g = geometry::gram(ds);
  double worst_bar = 0.0, worst_abs = 0.0;
  for (int depth = 1; depth <= 50; ++depth) {
    Eigen::MatrixXd bar = kernels::theta_bar(g, depth).entries;
    Eigen::MatrixXd abs = kernels::theta_infty(g, depth, 8).entries;
    double expected = depth * std::ldexp(1.0 / 8.0, 1 - depth);
    for (Eigen::Index i = 0; i < 16; ++i) {
      worst_bar = std::max(worst_bar, std::abs(bar(i, i) - 1.0));
      worst_abs = std::max(worst_abs, std::abs(abs(i, i) - expected));
    }
  }
  detail = "normalized diagonal off by " + fmt(worst_bar) + " (tolerance 1e-12), absolute diagonal off by " +
           fmt(worst_abs) + " (tolerance 1e-14), depths 1..50";
  return worst_bar <= 1e-12 && worst_abs <= 1e-14;
}

bool check_monotone(std::string& detail) {
  Rng rng(3);
  bool theta_ok = true, rho_ok = true;
  std::string theta_note, rho_note;
  double final_value = 0.0;
  for (int k = 0; k < 20; ++k) {
    double z0 = rng.uniform(-1.0, 1.0);

    kernels::ScalarKernelState s{z0, z0, 1};
    s = kernels::theta_bar_step(s);
    double prev = s.theta_bar;
    for (int depth = 3; depth <= 200; ++depth) {
      s = kernels::theta_bar_step(s);
      if (theta_ok && (!(s.theta_bar > prev) || s.theta_bar > 1.0)) {
        theta_ok = false;
        theta_note = "theta_bar stops increasing at depth " + std::to_string(depth) + " for z0 = " + fmt(z0) +
                     " (" + fmt(prev) + " -> " + fmt(s.theta_bar) + ")";
      }
      prev = s.theta_bar;
    }
    if (k == 0) final_value = prev;

    double r = z0;
    for (int depth = 2; depth <= 200; ++depth) {
      double next = kernels::h_arc(r);
      if (rho_ok && !(next > r)) {
        rho_ok = false;
        rho_note = "rho stops increasing at depth " + std::to_string(depth) + " for z0 = " + fmt(z0);
      }
      r = next;
    }
    if (rho_ok && kernels::rho_at_depth(z0, 23) < 0.95) {
      rho_ok = false;
      rho_note = "rho at depth 23 is " + fmt(kernels::rho_at_depth(z0, 23)) + " < 0.95 for z0 = " + fmt(z0);
    }
  }
  if (theta_ok && rho_ok) {
    detail = "20 pairs: theta_bar strictly increasing through depth 200, rho reaches 0.95 by depth 23";
    return true;
  }
  detail = (theta_ok ? "theta_bar increasing" : theta_note) + "; depth-200 value " + fmt(final_value) + "; " +
           (rho_ok ? "rho half holds (increasing, >= 0.95 at depth 23)" : rho_note);
  return false;
}

bool check_logdet(std::string& detail) {
  Rng rng(4);
  geometry::SphereDataset ds = geometry::synthetic_sphere(8, 128, geometry::Projection::canonical, rng);
  Eigen::MatrixXd g = geometry::gram(ds);

  double prev = linalg::log_det_sym(kernels::theta_bar(g, 2).entries).log_abs;
  double min_value = prev, last = prev;
  int min_depth = 2, first_rise = 0;
  for (int depth = 3; depth <= 60; ++depth) {
    linalg::LogDet ld = linalg::log_det_sym(kernels::theta_bar(g, depth).entries);
    if (ld.sign != 1) {
      detail = "determinant lost positivity at depth " + std::to_string(depth);
      return false;
    }
    if (!(ld.log_abs < prev) && first_rise == 0) first_rise = depth;
    if (ld.log_abs < min_value) {
      min_value = ld.log_abs;
      min_depth = depth;
    }
    prev = ld.log_abs;
    last = ld.log_abs;
  }

  bool monotone = first_rise == 0;
  bool below = min_value <= frozen::kLogDetFloor + 1e-9;
  detail = "log det bottoms at " + fmt(min_value) + " (depth " + std::to_string(min_depth) + "), depth-60 value " +
           fmt(last) +
           (monotone ? ", strictly decreasing" : ", first increase at depth " + std::to_string(first_rise)) +
           "; recorded floor " + fmt(frozen::kLogDetFloor);
  return monotone && below;
}

bool check_scalar_matrix(std::string& detail) {
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Eigen::Index n = 3 + (k % 6);
    Eigen::Index n0 = 4 + (k % 9);
    int depth = 2 + 2 * k;
    geometry::SphereDataset ds = geometry::synthetic_sphere(n, n0, geometry::Projection::canonical, rng);
    Eigen::MatrixXd g = geometry::gram(ds);
    Eigen::MatrixXd m = kernels::theta_bar(g, depth).entries;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(m(i, j) - kernels::theta_bar_at_depth(g(i, j), depth)));
  }
  detail = "10 datasets, matrix vs scalar recursion largest gap " + fmt(worst) + ", tolerance 1e-12";
  return worst <= 1e-12;
}

bool check_coefficients(std::string& detail) {
  Rng rng(6);
  geometry::SphereDataset ds = geometry::synthetic_sphere(6, 128, geometry::Projection::canonical, rng);
  kernels::KernelSequence seq = kernels::sequence_for(kernels::KernelKind::theta_bar);

  Eigen::VectorXd self_probe = ds.points.row(3).transpose();
  analysis::DepthTrace pinned = analysis::depth_sweep(seq, ds, self_probe, 30);
  Eigen::VectorXd v = pinned.coeffs.back();
  double basis_err = (v - Eigen::VectorXd::Unit(6, 3)).cwiseAbs().maxCoeff();

  Eigen::VectorXd probe = geometry::synthetic_probe(128, geometry::Projection::canonical, rng);
  analysis::DepthTrace trace = analysis::depth_sweep(seq, ds, probe, 60);
  double diff_early = trace.coeff_diffs[9];
  double diff_late = trace.coeff_diffs[58];

  std::vector<Eigen::VectorXd> probes;
  for (int p = 0; p < 100; ++p)
    probes.push_back(geometry::synthetic_probe(128, geometry::Projection::canonical, rng));
  analysis::BoundReport report = analysis::rde_bound_check(ds, probes, 30);

  bool basis_ok = basis_err <= 1e-8;
  bool shrink_ok = diff_late < diff_early;
  bool bound_ok = std::isfinite(report.max_component) &&
                  std::abs(report.max_component - frozen::kMaxCoefficientComponent) <= 1e-6;
  detail = "basis-vector error " + fmt(basis_err) + " (tolerance 1e-8); coefficient step " + fmt(diff_early) +
           " at depth 10 vs " + fmt(diff_late) + " at depth 59; max component over 100 probes " +
           fmt(report.max_component) + " vs recorded " + fmt(frozen::kMaxCoefficientComponent);
  return basis_ok && shrink_ok && bound_ok;
}

bool check_width_convergence(std::string& detail) {
  Rng rng(7);
  geometry::SphereDataset ds = geometry::synthetic_sphere(8, 16, geometry::Projection::canonical, rng);
  Eigen::MatrixXd target = kernels::theta_infty(geometry::gram(ds), 3, 16).entries;

  double prev = std::numeric_limits<double>::infinity();
  double last = prev;
  bool nonincreasing = true;
  std::string errs;
  for (Eigen::Index w : {256, 1024, 4096}) {
    finitewidth::EmpiricalNTK emp = finitewidth::empirical_ntk_averaged(16, {w, w}, ds.points, 32, 7);
    double err = (emp.entries - target).norm() / target.norm();
    nonincreasing = nonincreasing && err <= prev;
    prev = err;
    last = err;
    errs += (errs.empty() ? "" : ", ") + std::to_string(w) + ": " + fmt(err);
  }
  detail = "relative error by width {" + errs + "}, need nonincreasing and <= 0.1 at 4096";
  return nonincreasing && last <= 0.10;
}

bool check_predictors(std::string& detail) {
  Rng rng(8);

  double flow_worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Eigen::Index n = 3 + (k % 4);
    Eigen::Index n0 = 6 + (k % 5);
    geometry::SphereDataset ds = geometry::synthetic_sphere(n, n0, geometry::Projection::canonical, rng);
    Eigen::MatrixXd kernel = kernels::theta_infty(geometry::gram(ds), 3, static_cast<int>(n0)).entries;
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
    regression::RegressionSolution sol = regression::fit(kernel, ds.labels, y0);

    Eigen::VectorXd probe = geometry::synthetic_probe(n0, geometry::Projection::canonical, rng);
    Eigen::VectorXd gx = geometry::gram_row(ds, probe);
    Eigen::VectorXd kx(n);
    for (Eigen::Index i = 0; i < n; ++i)
      kx(i) = kernels::theta_infty_value(gx(i), 3, static_cast<int>(n0));

    for (double tau : {0.3, 1.0, 3.0}) {
      oracle::FlowResult flow = oracle::integrate_kernel_flow(kernel, ds.labels, y0, kx, 0.0, tau);
      flow_worst = std::max(flow_worst, std::abs(flow.probe - regression::predict_tau(sol, kx, 0.0, tau)));
      for (Eigen::Index i = 0; i < n; ++i)
        flow_worst = std::max(
            flow_worst, std::abs(flow.train(i) - regression::predict_tau(sol, kernel.col(i), 0.0, tau)));
    }
  }
  bool flow_ok = flow_worst <= 1e-6;

  geometry::SphereDataset ds = geometry::synthetic_sphere(8, 16, geometry::Projection::canonical, rng);
  Eigen::MatrixXd kernel = kernels::theta_infty(geometry::gram(ds), 3, 16).entries;
  double label_rms = std::sqrt(ds.labels.squaredNorm() / 8.0);

  finitewidth::MLPNetwork net0 = finitewidth::make_network(16, {4096, 4096}, Rng(8, 77).next_u64());
  Eigen::VectorXd f0_train = finitewidth::forward_batch(net0, ds.points);
  regression::RegressionSolution sol = regression::fit(kernel, ds.labels, f0_train);

  std::vector<Eigen::VectorXd> probes;
  std::vector<Eigen::VectorXd> probe_rows;
  std::vector<double> probe_f0;
  for (int p = 0; p < 4; ++p) {
    Eigen::VectorXd probe = geometry::synthetic_probe(16, geometry::Projection::canonical, rng);
    Eigen::VectorXd gx = geometry::gram_row(ds, probe);
    Eigen::VectorXd kx(8);
    for (Eigen::Index i = 0; i < 8; ++i) kx(i) = kernels::theta_infty_value(gx(i), 3, 16);
    probes.push_back(probe);
    probe_rows.push_back(kx);
    probe_f0.push_back(finitewidth::forward(net0, probe));
  }

  auto compare = [&](const finitewidth::MLPNetwork& trained, auto&& predict) {
    Eigen::VectorXd f_train = finitewidth::forward_batch(trained, ds.points);
    double rss = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i) {
      double diff = f_train(i) - predict(kernel.col(i), f0_train(i));
      rss += diff * diff;
    }
    double probe_worst = 0.0;
    for (int p = 0; p < 4; ++p)
      probe_worst = std::max(
          probe_worst, std::abs(finitewidth::forward(trained, probes[p]) - predict(probe_rows[p], probe_f0[p])));
    return std::pair<double, double>(std::sqrt(rss / 8.0), probe_worst);
  };

  finitewidth::TrainResult early = finitewidth::train_gd(net0, ds.points, ds.labels, 40, 0.05);
  auto [early_rmse, early_probe] = compare(early.net, [&](const Eigen::VectorXd& kx, double f0) {
    return regression::predict_tau(sol, kx, f0, 2.0);
  });
  bool early_ok = early_rmse <= 0.05 * label_rms && early_probe <= 0.10 * label_rms;

  double lr = 0.5 / sol.eigenvalues(0);
  int steps = static_cast<int>(std::ceil(10.0 / sol.eigenvalues(7) / lr));
  finitewidth::TrainResult late = finitewidth::train_gd(net0, ds.points, ds.labels, steps, lr);
  auto [late_rmse, late_probe] = compare(late.net, [&](const Eigen::VectorXd& kx, double f0) {
    return regression::predict_infinity(sol, kx, f0);
  });
  bool late_ok = late_rmse <= 0.05 * label_rms && late_probe <= 0.10 * label_rms;

  detail = "flow gap " + fmt(flow_worst) + " (tolerance 1e-6); t=2 train rmse " + fmt(early_rmse) +
           ", probe gap " + fmt(early_probe) + "; converged (" + std::to_string(steps) + " steps) train rmse " +
           fmt(late_rmse) + ", probe gap " + fmt(late_probe) + "; label rms " + fmt(label_rms);
  return flow_ok && early_ok && late_ok;
}

bool check_gradients(std::string& detail) {
  Rng rng(9);
  finitewidth::MLPNetwork net = finitewidth::make_network(6, {8, 8}, Rng(9, 1).next_u64());
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    Eigen::VectorXd x = geometry::synthetic_probe(6, geometry::Projection::canonical, rng);
    std::vector<Eigen::MatrixXd> analytic = finitewidth::parameter_gradients(net, x);
    std::vector<Eigen::MatrixXd> numeric = oracle::finite_difference_gradients(net, x, 1e-6);
    for (std::size_t l = 0; l < analytic.size(); ++l) {
      Eigen::MatrixXd rel =
          (analytic[l] - numeric[l]).cwiseAbs().cwiseQuotient(analytic[l].cwiseAbs().cwiseMax(1.0));
      worst = std::max(worst, rel.maxCoeff());
    }
  }
  detail = "20 probe points, largest relative gradient error " + fmt(worst) + ", tolerance 1e-5";
  return worst <= 1e-5;
}

bool check_default_sweep(std::string& detail) {
  Rng rng(10);
  geometry::SphereDataset ds = geometry::synthetic_sphere(8, 128, geometry::Projection::canonical, rng);
  Eigen::VectorXd probe = geometry::synthetic_probe(128, geometry::Projection::canonical, rng);

  const kernels::KernelKind kinds[] = {kernels::KernelKind::theta_bar, kernels::KernelKind::rho,
                                       kernels::KernelKind::eta};
  std::vector<analysis::DepthTrace> traces;
  for (kernels::KernelKind kind : kinds)
    traces.push_back(analysis::depth_sweep(kernels::sequence_for(kind), ds, probe, 10));

  auto spread = [](const Eigen::MatrixXd& m) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        lo = std::min(lo, m(i, j));
        hi = std::max(hi, m(i, j));
      }
    return hi - lo;
  };
  bool spreads_ok = spread(traces[1].kernels[9]) < spread(traces[1].kernels[0]) &&
                    spread(traces[2].kernels[9]) < spread(traces[2].kernels[0]);

  double bar_max = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = i + 1; j < 8; ++j) bar_max = std::max(bar_max, traces[0].kernels[9](i, j));
  bool slow_ok = bar_max < 0.95;

  double beta = static_cast<double>(oracle::squash_fixed_point_longdouble());
  double eta_gap = (traces[2].kernels[9].array() - beta).abs().maxCoeff();
  bool fixed_point_ok = eta_gap <= 1e-6;

  fs::path dir = fs::current_path() / "tmp_acceptance_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool stable = true;
  std::uint64_t csv_hash[3];
  for (int t = 0; t < 3; ++t) {
    analysis::write_trace_csv(traces[static_cast<std::size_t>(t)], dir / "a.csv");
    analysis::write_trace_csv(traces[static_cast<std::size_t>(t)], dir / "b.csv");
    std::string bytes = io::read_file(dir / "a.csv");
    stable = stable && bytes == io::read_file(dir / "b.csv");
    csv_hash[t] = oracle::fnv1a64(bytes);
    stable = stable && csv_hash[t] == frozen::kTraceCsvHash[t];
  }

  std::vector<double> depths_x(traces[0].depths.begin(), traces[0].depths.end());
  std::vector<svg::Series> series(2);
  series[0].label = "k(x0,x1)";
  series[1].label = "k(x,x0)";
  series[0].xs = series[1].xs = depths_x;
  for (std::size_t d = 0; d < 10; ++d) {
    series[0].ys.push_back(traces[0].kernels[d](0, 1));
    series[1].ys.push_back(traces[0].probe_rows[d](0));
  }
  svg::write_line_plot(dir / "a.svg", "theta_bar depth sweep", "depth", "kernel value", series);
  svg::write_line_plot(dir / "b.svg", "theta_bar depth sweep", "depth", "kernel value", series);
  std::string svg_bytes = io::read_file(dir / "a.svg");
  stable = stable && svg_bytes == io::read_file(dir / "b.svg");
  std::uint64_t svg_hash = oracle::fnv1a64(svg_bytes);
  stable = stable && svg_hash == frozen::kTracePlotHash;
  fs::remove_all(dir);

  detail = std::string("spreads shrink: ") + (spreads_ok ? "yes" : "no") + "; largest depth-10 theta_bar " +
           fmt(bar_max) + "; eta gap to fixed point " + fmt(eta_gap) + " (tolerance 1e-6); hashes " +
           hex64(csv_hash[0]) + ", " + hex64(csv_hash[1]) + ", " + hex64(csv_hash[2]) + ", " + hex64(svg_hash) +
           (stable ? " stable" : " vs recorded " + hex64(frozen::kTraceCsvHash[0]) + ", " +
                                     hex64(frozen::kTraceCsvHash[1]) + ", " + hex64(frozen::kTraceCsvHash[2]) +
                                     ", " + hex64(frozen::kTracePlotHash));
  return spreads_ok && slow_ok && fixed_point_ok && stable;
}

struct Criterion {
  int id;
  const char* name;
  bool (*run)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "closed-form constants", check_constants},
    {2, "sphere diagonal normalization", check_diagonal},
    {3, "depth monotonicity", check_monotone},
    {4, "log-determinant decay", check_logdet},
    {5, "matrix vs scalar recursion", check_scalar_matrix},
    {6, "coefficient localization", check_coefficients},
    {7, "finite-width convergence", check_width_convergence},
    {8, "predictor fidelity", check_predictors},
    {9, "gradient correctness", check_gradients},
    {10, "default sweep reproduction", check_default_sweep},
};

}  // namespace

int main(int argc, char** argv) {
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("unexpected exception: ") + e.what();
    }
    std::printf("%s criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", c.id, c.name, detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  return failures;
}
