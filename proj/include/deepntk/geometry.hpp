#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "io.hpp"
#include "rng.hpp"

namespace deepntk::geometry {

enum class Projection { canonical, stereographic, identity };

inline const char* to_string(Projection p) {
  switch (p) {
    case Projection::canonical: return "canonical";
    case Projection::stereographic: return "stereographic";
    default: return "identity";
  }
}

inline Projection projection_from_name(std::string_view name) {
  if (name == "canonical") return Projection::canonical;
  if (name == "stereographic") return Projection::stereographic;
  if (name == "identity") return Projection::identity;
  throw std::invalid_argument("unknown projection '" + std::string(name) + "'");
}

struct RawDataset {
  Eigen::MatrixXd points;  // one point per row, arbitrary scale
  Eigen::VectorXd labels;
};

struct SphereDataset {
  Eigen::MatrixXd points;  // unit-norm rows
  Eigen::VectorXd labels;
  Projection projection = Projection::canonical;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

namespace detail {

inline void check_raw(const RawDataset& raw) {
  if (raw.points.rows() < 1) throw std::invalid_argument("dataset needs at least one point");
  if (raw.points.cols() < 2) throw std::invalid_argument("points need at least two coordinates");
  if (raw.labels.size() != raw.points.rows())
    throw DimensionMismatchError("label count does not match point count");
}

// equal or antipodal rows make downstream kernel matrices singular
inline void reject_duplicates(const Eigen::MatrixXd& points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      double diff = (points.row(i) - points.row(j)).norm();
      double sum = (points.row(i) + points.row(j)).norm();
      if (diff < 1e-12 || sum < 1e-12) throw DuplicatePointError(i, j);
    }
}

}  // namespace detail

inline SphereDataset project_canonical(const RawDataset& raw) {
  detail::check_raw(raw);
  Eigen::MatrixXd points(raw.points.rows(), raw.points.cols());
  for (Eigen::Index i = 0; i < raw.points.rows(); ++i) {
    double norm = raw.points.row(i).norm();
    if (norm < 1e-300) throw ZeroRowError(i);
    points.row(i) = raw.points.row(i) / norm;
  }
  detail::reject_duplicates(points);
  return {std::move(points), raw.labels, Projection::canonical};
}

// inverse stereographic projection from the north pole of S^d; total and
// injective, so colinear inputs still land on distinct sphere points
inline SphereDataset project_stereographic(const RawDataset& raw) {
  detail::check_raw(raw);
  Eigen::Index d = raw.points.cols();
  Eigen::MatrixXd points(raw.points.rows(), d + 1);
  for (Eigen::Index i = 0; i < raw.points.rows(); ++i) {
    double sq = raw.points.row(i).squaredNorm();
    double scale = 1.0 / (sq + 1.0);
    points.row(i).head(d) = 2.0 * scale * raw.points.row(i);
    points(i, d) = (sq - 1.0) * scale;
  }
  return {std::move(points), raw.labels, Projection::stereographic};
}

// points already on the sphere are validated, never altered
inline SphereDataset as_sphere(const RawDataset& raw) {
  detail::check_raw(raw);
  for (Eigen::Index i = 0; i < raw.points.rows(); ++i) {
    double norm = raw.points.row(i).norm();
    if (std::abs(norm - 1.0) > 1e-12)
      throw DomainError("row " + std::to_string(i) + " has norm " + io::format_double(norm) +
                        ", expected a unit vector");
  }
  detail::reject_duplicates(raw.points);
  return {raw.points, raw.labels, Projection::identity};
}

inline SphereDataset project(const RawDataset& raw, Projection p) {
  switch (p) {
    case Projection::canonical: return project_canonical(raw);
    case Projection::stereographic: return project_stereographic(raw);
    default: return as_sphere(raw);
  }
}

inline Eigen::VectorXd project_point(const Eigen::VectorXd& x, Projection p) {
  switch (p) {
    case Projection::canonical: {
      double norm = x.norm();
      if (norm < 1e-300) throw ZeroRowError(0);
      return x / norm;
    }
    case Projection::stereographic: {
      Eigen::Index d = x.size();
      Eigen::VectorXd y(d + 1);
      double sq = x.squaredNorm();
      double scale = 1.0 / (sq + 1.0);
      y.head(d) = 2.0 * scale * x;
      y(d) = (sq - 1.0) * scale;
      return y;
    }
    default: {
      if (std::abs(x.norm() - 1.0) > 1e-12) throw DomainError("probe point is not a unit vector");
      return x;
    }
  }
}

inline double clamp_inner(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

// pairwise inner products, upper triangle mirrored for exact symmetry and
// entries clamped to [-1, 1] so rounding never escapes the arcsin domain;
// the diagonal is pinned to 1: self inner products of unit vectors may round
// one ulp low, and the depth recursions amplify that through the square-root
// slope of the correlation map near its fixed point
inline Eigen::MatrixXd gram(const SphereDataset& ds) {
  Eigen::Index n = ds.size();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = clamp_inner(ds.points.row(i).dot(ds.points.row(j)));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

inline Eigen::VectorXd gram_row(const SphereDataset& ds, const Eigen::VectorXd& x) {
  if (x.size() != ds.dim())
    throw DimensionMismatchError("probe has " + std::to_string(x.size()) + " coordinates, dataset points have " +
                                 std::to_string(ds.dim()));
  Eigen::VectorXd row(ds.size());
  for (Eigen::Index i = 0; i < ds.size(); ++i) row(i) = clamp_inner(ds.points.row(i).dot(x));
  return row;
}

inline RawDataset synthetic_raw(Eigen::Index n, Eigen::Index dim, Rng& rng) {
  if (n < 1 || dim < 2) throw std::invalid_argument("synthetic dataset needs n >= 1 and dim >= 2");
  Eigen::MatrixXd points(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) points(i, j) = rng.uniform(-1.0, 1.0);
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels(i) = rng.uniform(-1.0, 1.0);
  return {std::move(points), std::move(labels)};
}

inline SphereDataset synthetic_sphere(Eigen::Index n, Eigen::Index n0, Projection p, Rng& rng) {
  return project(synthetic_raw(n, n0, rng), p);
}

inline Eigen::VectorXd synthetic_probe(Eigen::Index n0, Projection p, Rng& rng) {
  Eigen::VectorXd x(n0);
  for (Eigen::Index j = 0; j < n0; ++j) x(j) = rng.uniform(-1.0, 1.0);
  // a uniform draw is almost never on the sphere, so the identity projection
  // falls back to normalizing the probe
  return project_point(x, p == Projection::identity ? Projection::canonical : p);
}

// comma-separated, last column is the label; a non-numeric first row is
// treated as a header
inline RawDataset read_raw_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  Eigen::Index cols = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    auto cells = io::split_line(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!io::parse_double(cells[c], row[c])) {
        numeric = false;
        if (!header_allowed)
          throw ParseError(path.string() + " line " + std::to_string(line_no) + ": cannot parse '" +
                           std::string(io::trim(cells[c])) + "' as a number");
        break;
      }
    header_allowed = false;
    if (!numeric) continue;  // header row
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                       " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  if (cols < 3) throw ParseError(path.string() + ": need at least two coordinate columns plus a label column");

  RawDataset raw;
  raw.points.resize(static_cast<Eigen::Index>(rows.size()), cols - 1);
  raw.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j + 1 < cols; ++j) raw.points(static_cast<Eigen::Index>(i), j) = rows[i][j];
    raw.labels(static_cast<Eigen::Index>(i)) = rows[i][cols - 1];
  }
  return raw;
}

inline void write_raw_csv(const RawDataset& raw, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  for (Eigen::Index i = 0; i < raw.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.points.cols(); ++j) out << io::format_double(raw.points(i, j)) << ',';
    out << io::format_double(raw.labels(i)) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace deepntk::geometry
