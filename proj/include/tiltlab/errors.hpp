#pragma once

#include <stdexcept>
#include <string>

namespace tiltlab {

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A batch drawn from the wrong measure was passed to an estimator.
struct WrongMeasureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested quantity does not exist for this potential (e.g. width of an
// unbounded gradient set).
struct NotApplicableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_number)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + msg),
        line(line_number) {}
  int line;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& msg, double last_residual)
      : std::runtime_error(msg + " (residual " + std::to_string(last_residual) + ")"),
        residual(last_residual) {}
  double residual;
};

}  // namespace tiltlab
