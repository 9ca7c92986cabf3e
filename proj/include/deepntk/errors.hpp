#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deepntk {

struct ZeroRowError : std::runtime_error {
  explicit ZeroRowError(std::ptrdiff_t row)
      : std::runtime_error("row " + std::to_string(row) + " has zero norm and cannot be projected"),
        row(row) {}
  std::ptrdiff_t row;
};

struct DuplicatePointError : std::runtime_error {
  DuplicatePointError(std::ptrdiff_t i, std::ptrdiff_t j)
      : std::runtime_error("points " + std::to_string(i) + " and " + std::to_string(j) +
                           " coincide or are antipodal on the sphere"),
        i(i),
        j(j) {}
  std::ptrdiff_t i;
  std::ptrdiff_t j;
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularKernelError : std::runtime_error {
  explicit SingularKernelError(double smallest_eigenvalue)
      : std::runtime_error("kernel matrix is numerically singular (smallest eigenvalue " +
                           std::to_string(smallest_eigenvalue) + ")"),
        smallest_eigenvalue(smallest_eigenvalue) {}
  double smallest_eigenvalue;
};

struct DimensionMismatchError : std::runtime_error {
  explicit DimensionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteLossError : std::runtime_error {
  explicit NonFiniteLossError(int step)
      : std::runtime_error("training loss became non-finite at step " + std::to_string(step)),
        step(step) {}
  int step;
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deepntk
