#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "deepntk/deepntk.hpp"

namespace fs = std::filesystem;
using namespace deepntk;

namespace {

struct Options {
  std::uint64_t seed = 0;
  int n = 8;
  int n0 = 128;
  int L_max = 10;
  std::string kernel;  // empty means the per-command default
  std::string projection = "canonical";
  std::vector<int> widths = {256, 1024, 4096};
  std::vector<int> depths;  // kernel command, requested L values
  std::vector<double> taus;
  double tau = 2.0;
  double lr = 0.1;
  int steps = 20;
  int seeds = 32;
  int depth = 3;
  int n_test = 4;
  std::string data;
  std::string train;
  std::string test;
  fs::path output_dir;
};

fs::path default_output_dir() {
  const char* env = std::getenv("DEEPNTK_OUT");
  return env && *env ? fs::path(env) : fs::path("out");
}

void add_common(CLI::App* cmd, Options& o) {
  o.output_dir = default_output_dir();
  cmd->add_option("--seed", o.seed, "seed for all pseudorandom draws")->capture_default_str();
  cmd->add_option("--n", o.n, "number of dataset points")->check(CLI::Range(1, 1 << 16))->capture_default_str();
  cmd->add_option("--n0", o.n0, "raw input dimension")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  cmd->add_option("--L-max", o.L_max, "largest depth")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  cmd->add_option("--projection", o.projection, "how points reach the sphere")
      ->check(CLI::IsMember({"canonical", "stereographic", "identity"}))
      ->capture_default_str();
  cmd->add_option("--out", o.output_dir, "output directory (default $DEEPNTK_OUT or ./out)");
}

std::vector<kernels::KernelKind> selected_kinds(const Options& o, bool all_by_default) {
  if (!o.kernel.empty()) return {kernels::kind_from_name(o.kernel)};
  if (all_by_default)
    return {kernels::KernelKind::theta_bar, kernels::KernelKind::rho, kernels::KernelKind::eta};
  return {kernels::KernelKind::theta_bar};
}

// data file if given, otherwise a seeded uniform draw projected per config;
// rng continues past the dataset so later draws stay reproducible
geometry::SphereDataset load_dataset(const Options& o, Rng& rng) {
  geometry::Projection proj = geometry::projection_from_name(o.projection);
  if (!o.data.empty()) return geometry::project(geometry::read_raw_csv(o.data), proj);
  if (proj == geometry::Projection::identity)
    throw std::invalid_argument("synthetic points are not on the sphere; identity projection needs --data");
  return geometry::synthetic_sphere(o.n, o.n0, proj, rng);
}

Eigen::VectorXd draw_probe(const Options& o, const geometry::SphereDataset& ds, Rng& rng) {
  geometry::Projection proj = ds.projection;
  Eigen::Index raw_dim = proj == geometry::Projection::stereographic ? ds.dim() - 1 : ds.dim();
  return geometry::synthetic_probe(raw_dim, proj, rng);
}

void write_manifest(const fs::path& dir, const std::string& command, const Options& o,
                    const std::vector<std::string>& outputs) {
  auto out = io::open_output(dir / "manifest");
  out << "version = " << kVersion << '\n';
  out << "command = " << command << '\n';
  out << "seed = " << o.seed << '\n';
  out << "n = " << o.n << '\n';
  out << "n0 = " << o.n0 << '\n';
  out << "L_max = " << o.L_max << '\n';
  out << "kernel = " << (o.kernel.empty() ? "default" : o.kernel) << '\n';
  out << "projection = " << o.projection << '\n';
  out << "widths =";
  for (int w : o.widths) out << ' ' << w;
  out << '\n';
  out << "lr = " << io::format_double(o.lr) << '\n';
  out << "steps = " << o.steps << '\n';
  out << "tau = " << io::format_double(o.tau) << '\n';
  if (!o.taus.empty()) {
    out << "taus =";
    for (double t : o.taus) out << ' ' << io::format_double(t);
    out << '\n';
  }
  if (!o.data.empty()) out << "data = " << o.data << '\n';
  if (!o.train.empty()) out << "train = " << o.train << '\n';
  if (!o.test.empty()) out << "test = " << o.test << '\n';
  out << "outputs =";
  for (const auto& f : outputs) out << ' ' << f;
  out << '\n';
  if (!out) throw IoError("failed writing manifest");
}

void write_matrix_csv(const Eigen::MatrixXd& m, const fs::path& path) {
  auto out = io::open_output(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << io::format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

int run_kernel(Options& o) {
  Rng rng(o.seed);
  geometry::SphereDataset ds = load_dataset(o, rng);
  Eigen::MatrixXd g = geometry::gram(ds);
  if (o.depths.empty()) o.depths = {o.L_max};

  fs::create_directories(o.output_dir);
  std::vector<std::string> outputs;
  for (kernels::KernelKind kind : selected_kinds(o, false))
    for (int depth : o.depths) {
      kernels::KernelMatrix k = kind == kernels::KernelKind::theta_bar ? kernels::theta_bar(g, depth)
                                : kind == kernels::KernelKind::rho     ? kernels::rho_matrix(g, depth)
                                                                       : kernels::eta_matrix(g, depth);
      std::string name = std::string("kernel_") + kernels::to_string(kind) + "_L" + std::to_string(depth) + ".csv";
      write_matrix_csv(k.entries, o.output_dir / name);
      outputs.push_back(name);
    }
  write_manifest(o.output_dir, "kernel", o, outputs);
  std::cout << "wrote " << outputs.size() << " kernel matrix file(s) to " << o.output_dir.string() << '\n';
  return 0;
}

void write_sweep_plots(const analysis::DepthTrace& trace, const fs::path& dir, const std::string& stem,
                       std::vector<std::string>& outputs) {
  std::vector<double> depths(trace.depths.begin(), trace.depths.end());
  Eigen::Index n = trace.kernels.front().rows();

  std::vector<svg::Series> values;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      svg::Series s{"k(x" + std::to_string(i) + ",x" + std::to_string(j) + ")", depths, {}};
      for (const auto& m : trace.kernels) s.ys.push_back(m(i, j));
      values.push_back(std::move(s));
    }
  for (Eigen::Index j = 0; j < n; ++j) {
    svg::Series s{"k(x,x" + std::to_string(j) + ")", depths, {}};
    for (const auto& row : trace.probe_rows) s.ys.push_back(row(j));
    values.push_back(std::move(s));
  }
  svg::write_line_plot(dir / (stem + ".svg"), trace.kernel_name + " pairwise values", "depth L", "kernel value",
                       values);
  outputs.push_back(stem + ".svg");

  svg::Series logdet{"log det", depths, {}};
  for (const auto& ld : trace.logdets)
    logdet.ys.push_back(ld.sign > 0 ? ld.log_abs : std::numeric_limits<double>::quiet_NaN());
  svg::write_line_plot(dir / (stem + "_logdet.svg"), trace.kernel_name + " normalized log determinant",
                       "depth L", "log det", {logdet});
  outputs.push_back(stem + "_logdet.svg");

  svg::Series cn{"|v|", depths, trace.coeff_norms};
  svg::write_line_plot(dir / (stem + "_coeffnorm.svg"), trace.kernel_name + " coefficient vector norm",
                       "depth L", "|v|_2", {cn});
  outputs.push_back(stem + "_coeffnorm.svg");
}

int run_sweep(Options& o) {
  if (o.L_max < 2) throw std::invalid_argument("sweep needs --L-max >= 2");
  Rng rng(o.seed);
  geometry::SphereDataset ds = load_dataset(o, rng);
  Eigen::VectorXd probe = draw_probe(o, ds, rng);

  fs::create_directories(o.output_dir);
  std::vector<std::string> outputs;
  for (kernels::KernelKind kind : selected_kinds(o, true)) {
    analysis::DepthTrace trace = analysis::depth_sweep(kernels::sequence_for(kind), ds, probe, o.L_max);
    std::string stem = std::string("sweep_") + kernels::to_string(kind);
    analysis::write_trace_csv(trace, o.output_dir / (stem + ".csv"));
    outputs.push_back(stem + ".csv");
    write_sweep_plots(trace, o.output_dir, stem, outputs);
  }
  write_manifest(o.output_dir, "sweep", o, outputs);
  std::cout << "wrote " << outputs.size() << " sweep file(s) to " << o.output_dir.string() << '\n';
  return 0;
}

int run_predict(Options& o) {
  geometry::Projection proj = geometry::projection_from_name(o.projection);
  Rng rng(o.seed);

  geometry::SphereDataset train_ds =
      !o.train.empty() ? geometry::project(geometry::read_raw_csv(o.train), proj) : load_dataset(o, rng);
  geometry::RawDataset test_raw;
  if (!o.test.empty()) {
    test_raw = geometry::read_raw_csv(o.test);
  } else {
    if (proj == geometry::Projection::identity)
      throw std::invalid_argument("synthetic test points need a non-identity projection; pass --test");
    test_raw = geometry::synthetic_raw(o.n_test, proj == geometry::Projection::stereographic
                                                     ? train_ds.dim() - 1
                                                     : train_ds.dim(),
                                       rng);
  }

  int n0_ambient = static_cast<int>(train_ds.dim());
  Eigen::MatrixXd kernel = kernels::theta_infty(geometry::gram(train_ds), o.L_max, n0_ambient).entries;
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(train_ds.size());
  regression::RegressionSolution sol = regression::fit(kernel, train_ds.labels, y0);

  fs::create_directories(o.output_dir);
  auto out = io::open_output(o.output_dir / "predictions.csv");
  out << "index,label,f_infinity";
  for (double t : o.taus) out << ",f_tau_" << io::format_double(t);
  out << '\n';
  for (Eigen::Index i = 0; i < test_raw.points.rows(); ++i) {
    Eigen::VectorXd x = geometry::project_point(test_raw.points.row(i).transpose(), proj);
    Eigen::VectorXd gx = geometry::gram_row(train_ds, x);
    Eigen::VectorXd kx(gx.size());
    for (Eigen::Index j = 0; j < gx.size(); ++j) kx(j) = kernels::theta_infty_value(gx(j), o.L_max, n0_ambient);
    out << i << ',' << io::format_double(test_raw.labels(i)) << ','
        << io::format_double(regression::predict_infinity(sol, kx, 0.0));
    for (double t : o.taus) out << ',' << io::format_double(regression::predict_tau(sol, kx, 0.0, t));
    out << '\n';
  }
  if (!out) throw IoError("failed writing predictions.csv");
  out.close();

  write_manifest(o.output_dir, "predict", o, {"predictions.csv"});
  std::cout << "wrote predictions for " << test_raw.points.rows() << " point(s) to "
            << (o.output_dir / "predictions.csv").string() << '\n';
  return 0;
}

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

int run_verify(Options& o) {
  Rng rng(o.seed);
  geometry::Projection proj = geometry::projection_from_name(o.projection);
  if (proj == geometry::Projection::identity)
    throw std::invalid_argument("verify draws synthetic data; use canonical or stereographic projection");
  geometry::SphereDataset ds = geometry::synthetic_sphere(o.n, o.n0, proj, rng);
  int dim = static_cast<int>(ds.dim());
  Eigen::MatrixXd g = geometry::gram(ds);
  std::vector<Check> checks;

  {  // a single linear layer has an exactly computable tangent kernel
    finitewidth::MLPNetwork lin = finitewidth::make_network(dim, {}, Rng(o.seed, 1).next_u64());
    double err = (finitewidth::empirical_ntk(lin, ds.points).entries - g / dim).cwiseAbs().maxCoeff();
    checks.push_back({"linear-depth-1-kernel", err <= 1e-10, "max abs deviation " + io::format_double(err)});
  }

  Eigen::MatrixXd theta = kernels::theta_infty(g, o.depth, dim).entries;
  double theta_norm = theta.norm();
  {  // the empirical kernel must approach the closed form as width grows
    std::string detail;
    bool nonincreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    double last = std::numeric_limits<double>::infinity();
    for (int w : o.widths) {
      std::vector<Eigen::Index> hidden(static_cast<std::size_t>(o.depth - 1), w);
      finitewidth::EmpiricalNTK k = finitewidth::empirical_ntk_averaged(dim, hidden, ds.points, o.seeds, o.seed);
      double err = (k.entries - theta).norm() / theta_norm;
      detail += (detail.empty() ? "" : ", ") + std::string("width ") + std::to_string(w) + ": " +
                io::format_double(err);
      if (err > prev) nonincreasing = false;
      prev = err;
      last = err;
    }
    checks.push_back({"width-convergence", nonincreasing && last <= 0.10, detail});
  }

  regression::RegressionSolution sol = regression::fit(theta, ds.labels, Eigen::VectorXd::Zero(ds.size()));
  double label_rms = std::sqrt(ds.labels.squaredNorm() / ds.labels.size());
  std::vector<Eigen::VectorXd> probes;
  Eigen::MatrixXd probe_kx(static_cast<Eigen::Index>(o.n_test), ds.size());
  for (int p = 0; p < o.n_test; ++p) {
    Eigen::VectorXd x = draw_probe(o, ds, rng);
    Eigen::VectorXd gx = geometry::gram_row(ds, x);
    for (Eigen::Index j = 0; j < gx.size(); ++j)
      probe_kx(p, j) = kernels::theta_infty_value(gx(j), o.depth, dim);
    probes.push_back(std::move(x));
  }
  int width = o.widths.back();
  std::vector<Eigen::Index> hidden(static_cast<std::size_t>(o.depth - 1), width);
  finitewidth::MLPNetwork net = finitewidth::make_network(dim, hidden, Rng(o.seed, 2).next_u64());
  Eigen::VectorXd f0_train = finitewidth::forward_batch(net, ds.points);
  Eigen::VectorXd f0_probe(o.n_test);
  for (int p = 0; p < o.n_test; ++p) f0_probe(p) = finitewidth::forward(net, probes[static_cast<std::size_t>(p)]);
  regression::RegressionSolution sol_net = regression::fit(theta, ds.labels, f0_train);

  auto trained_vs_predicted = [&](const std::string& name, double target_time, bool infinite) {
    int steps = std::max(1, static_cast<int>(std::ceil(target_time / o.lr)));
    double lr = target_time / steps;
    finitewidth::TrainResult tr = finitewidth::train_gd(net, ds.points, ds.labels, steps, lr);
    double train_dev = 0.0;
    Eigen::VectorXd trained = finitewidth::forward_batch(tr.net, ds.points);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      Eigen::VectorXd kx = theta.row(i).transpose();
      double want = infinite ? regression::predict_infinity(sol_net, kx, sol_net.f0_train(i))
                             : regression::predict_tau(sol_net, kx, sol_net.f0_train(i), target_time);
      train_dev += (trained(i) - want) * (trained(i) - want);
    }
    train_dev = std::sqrt(train_dev / ds.size());
    double probe_dev = 0.0;
    for (int p = 0; p < o.n_test; ++p) {
      Eigen::VectorXd kx = probe_kx.row(p).transpose();
      double want = infinite ? regression::predict_infinity(sol_net, kx, f0_probe(p))
                             : regression::predict_tau(sol_net, kx, f0_probe(p), target_time);
      probe_dev = std::max(probe_dev, std::abs(finitewidth::forward(tr.net, probes[static_cast<std::size_t>(p)]) - want));
    }
    bool pass = train_dev <= 0.05 * label_rms && probe_dev <= 0.10 * label_rms;
    checks.push_back({name, pass,
                      "train rmse " + io::format_double(train_dev) + ", probe deviation " +
                          io::format_double(probe_dev) + ", label rms " + io::format_double(label_rms) +
                          (tr.stability_warning ? ", unstable learning rate" : "")});
  };
  trained_vs_predicted("trained-vs-early-stopped", o.tau, false);
  double t_conv = 8.0 / sol.eigenvalues(sol.eigenvalues.size() - 1);
  trained_vs_predicted("trained-vs-infinite-time", t_conv, true);

  fs::create_directories(o.output_dir);
  bool all_pass = true;
  auto out = io::open_output(o.output_dir / "verification_report.txt");
  for (const auto& c : checks) {
    all_pass = all_pass && c.pass;
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  if (!out) throw IoError("failed writing verification_report.txt");
  out.close();
  write_manifest(o.output_dir, "verify", o, {"verification_report.txt"});
  return all_pass ? 0 : 3;
}

int run_criteria(Options& o) {
  if (o.L_max < 2) throw std::invalid_argument("criteria needs --L-max >= 2");
  Rng rng(o.seed);
  geometry::SphereDataset ds = load_dataset(o, rng);
  Eigen::MatrixXd g = geometry::gram(ds);

  fs::create_directories(o.output_dir);
  std::vector<std::string> outputs;
  std::string text;
  for (kernels::KernelKind kind : selected_kinds(o, true)) {
    kernels::CriteriaReport report = kernels::kernel_criteria_check(kernels::sequence_for(kind), g, o.L_max);
    std::string name = std::string("criteria_") + kernels::to_string(kind) + ".csv";
    analysis::write_criteria_csv(report, o.output_dir / name);
    outputs.push_back(name);
    text += analysis::render_criteria_text(report);
  }
  auto out = io::open_output(o.output_dir / "criteria_report.txt");
  out << text;
  if (!out) throw IoError("failed writing criteria_report.txt");
  out.close();
  outputs.push_back("criteria_report.txt");
  std::cout << text;
  write_manifest(o.output_dir, "criteria", o, outputs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-form deep tangent kernels: depth sweeps, regression predictors, finite-width checks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a key=value file");

  Options kernel_o, sweep_o, predict_o, verify_o, criteria_o;

  CLI::App* kernel_cmd = app.add_subcommand("kernel", "write kernel matrices at requested depths");
  add_common(kernel_cmd, kernel_o);
  kernel_cmd->add_flag("--synthetic", "draw a seeded synthetic dataset (default when --data is absent)");
  kernel_cmd->add_option("--data", kernel_o.data, "input CSV, last column is the label");
  kernel_cmd->add_option("--kind", kernel_o.kernel, "kernel family")
      ->check(CLI::IsMember({"theta_bar", "rho", "eta"}));
  kernel_cmd->add_option("--L", kernel_o.depths, "depth(s) to emit, repeatable (default: L-max)");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "depth sweep with CSV and SVG traces");
  add_common(sweep_cmd, sweep_o);
  sweep_cmd->add_flag("--synthetic", "draw a seeded synthetic dataset (default when --data is absent)");
  sweep_cmd->add_option("--data", sweep_o.data, "input CSV, last column is the label");
  sweep_cmd->add_option("--kernel", sweep_o.kernel, "restrict to one kernel family (default: all three)")
      ->check(CLI::IsMember({"theta_bar", "rho", "eta"}));

  CLI::App* predict_cmd = app.add_subcommand("predict", "kernel regression predictions at test points");
  add_common(predict_cmd, predict_o);
  predict_cmd->add_flag("--synthetic", "draw seeded synthetic train/test data when paths are absent");
  predict_cmd->add_option("--train", predict_o.train, "training CSV, last column is the label");
  predict_cmd->add_option("--test", predict_o.test, "test CSV, last column is the label");
  predict_cmd->add_option("--tau", predict_o.taus, "early-stopping time(s), repeatable");
  predict_cmd->add_option("--n-test", predict_o.n_test, "synthetic test points")
      ->check(CLI::Range(1, 1 << 16))
      ->capture_default_str();

  CLI::App* verify_cmd = app.add_subcommand("verify", "finite-width network against the closed-form predictors");
  verify_o.n0 = 16;
  add_common(verify_cmd, verify_o);
  verify_cmd->add_option("--widths", verify_o.widths, "hidden widths for the convergence sweep")
      ->capture_default_str();
  verify_cmd->add_option("--depth", verify_o.depth, "network depth in weight layers")
      ->check(CLI::Range(2, 64))
      ->capture_default_str();
  verify_cmd->add_option("--seeds", verify_o.seeds, "independent initializations to average")
      ->check(CLI::Range(1, 1 << 12))
      ->capture_default_str();
  verify_cmd->add_option("--lr", verify_o.lr, "gradient descent learning rate")->capture_default_str();
  verify_cmd->add_option("--tau", verify_o.tau, "training time for the early-stopping comparison")
      ->capture_default_str();
  verify_cmd->add_option("--n-test", verify_o.n_test, "probe points")->check(CLI::Range(1, 256))->capture_default_str();

  CLI::App* criteria_cmd = app.add_subcommand("criteria", "per-depth kernel family diagnostics");
  add_common(criteria_cmd, criteria_o);
  criteria_cmd->add_flag("--synthetic", "draw a seeded synthetic dataset (default when --data is absent)");
  criteria_cmd->add_option("--data", criteria_o.data, "input CSV, last column is the label");
  criteria_cmd->add_option("--kernel", criteria_o.kernel, "restrict to one kernel family (default: all three)")
      ->check(CLI::IsMember({"theta_bar", "rho", "eta"}));

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(kernel_cmd)) return run_kernel(kernel_o);
    if (app.got_subcommand(sweep_cmd)) return run_sweep(sweep_o);
    if (app.got_subcommand(predict_cmd)) return run_predict(predict_o);
    if (app.got_subcommand(verify_cmd)) return run_verify(verify_o);
    return run_criteria(criteria_o);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const SingularKernelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
