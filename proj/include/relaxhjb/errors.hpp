#ifndef RELAXHJB_ERRORS_HPP
#define RELAXHJB_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace relaxhjb {

// Bad argument to a pure function (wrong size, eps <= 0 where smoothing is
// required, unsupported K, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The requested operation is not defined for this generator family.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Coefficient bundle violates ellipticity or sign constraints.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A perturbed model failed re-validation.
class PerturbationError : public ModelError {
 public:
  using ModelError::ModelError;
};

// The monotone stencil cannot be built (cross-diffusion too large).
class DiscretizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept {
    return residual_history_;
  }

 private:
  std::vector<double> residual_history_;
};

class NotPsdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration problems. `line` is 0 when the error is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace relaxhjb

#endif  // RELAXHJB_ERRORS_HPP
