#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robustkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent model dimensions or malformed model data. `matrix()` names the
/// offending matrix ("A", "B", "C", "sample_time", "labels", ...).
class ValidationError : public Error {
 public:
  ValidationError(std::string matrix, const std::string& what)
      : Error(what), matrix_(std::move(matrix)) {}
  const std::string& matrix() const noexcept { return matrix_; }

 private:
  std::string matrix_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Operation called on a model of the wrong time domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedNormError : public Error {
 public:
  explicit UnsupportedNormError(double lambda)
      : Error("unsupported precision norm lambda = " + std::to_string(lambda) +
              " (only 1 and 2 are supported)"),
        lambda_(lambda) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

class DiscretizationError : public Error {
 public:
  DiscretizationError(const std::string& what, double smallest_singular_value)
      : Error(what), sigma_min_(smallest_singular_value) {}
  double smallest_singular_value() const noexcept { return sigma_min_; }

 private:
  double sigma_min_;
};

class NotPsdError : public Error {
 public:
  NotPsdError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Iterative method hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, long iterations)
      : Error(what), iterations_(iterations) {}
  long iterations() const noexcept { return iterations_; }

 private:
  long iterations_;
};

/// Error dynamics are unstable (discrete spectral radius >= 1 or continuous
/// spectral abscissa >= 0). `measure()` carries that number.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, double measure)
      : Error(what), measure_(measure) {}
  double measure() const noexcept { return measure_; }

 private:
  double measure_;
};

/// A trajectory left the finite range. `time()` is the first bad timestamp.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class PruningRejected : public Error {
 public:
  PruningRejected(const std::string& what, std::vector<int> sensors)
      : Error(what), sensors_(std::move(sensors)) {}
  const std::vector<int>& sensors() const noexcept { return sensors_; }

 private:
  std::vector<int> sensors_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnknownCaseError : public Error {
 public:
  UnknownCaseError(const std::string& name,
                   const std::vector<std::string>& valid)
      : Error(message(name, valid)), valid_(valid) {}
  const std::vector<std::string>& valid_names() const noexcept {
    return valid_;
  }

 private:
  static std::string message(const std::string& name,
                             const std::vector<std::string>& valid) {
    std::string m = "unknown case '" + name + "'; valid cases:";
    for (const auto& v : valid) m += " " + v;
    return m;
  }
  std::vector<std::string> valid_;
};

}  // namespace robustkf
