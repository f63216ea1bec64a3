#pragma once

#include <stdexcept>
#include <string>

namespace concentra {

// Root of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public ConfigError {
 public:
  ValidationError(std::string path, const std::string& what)
      : ConfigError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class ModelEvaluationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConstraintInfeasibleError : public Error {
 public:
  ConstraintInfeasibleError(const std::string& what, double rate_at_zero,
                            double rate_at_upper)
      : Error(what), rate_at_zero_(rate_at_zero), rate_at_upper_(rate_at_upper) {}
  double rate_at_zero() const noexcept { return rate_at_zero_; }
  double rate_at_upper() const noexcept { return rate_at_upper_; }

 private:
  double rate_at_zero_;
  double rate_at_upper_;
};

class NoSteadyStateError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class RangeError : public Error {
 public:
  RangeError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class BoundaryError : public Error {
 public:
  using Error::Error;
};

class SingularClosureError : public Error {
 public:
  using Error::Error;
};

class DegenerateInitializationError : public Error {
 public:
  using Error::Error;
};

}  // namespace concentra
