#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nlcs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. The CLI maps these onto its exit-code contract:
// input/domain problems -> 2, numeric divergence -> 3, budget -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested capability is not exposed by this oracle (e.g. Hessian access
// through a counted wrapper).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double best_estimate)
      : Error(msg), best(best_estimate) {}
  double best;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::int64_t at_step)
      : Error(msg), step(at_step) {}
  std::int64_t step;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& msg, double projected_count)
      : Error(msg), projected(projected_count) {}
  double projected;
};

class PackingError : public Error {
 public:
  using Error::Error;
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class GridRangeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  SpecError(const std::string& msg, std::string field_path)
      : Error(msg), path(std::move(field_path)) {}
  std::string path;
};

}  // namespace nlcs
