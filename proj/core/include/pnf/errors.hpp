#pragma once

#include <stdexcept>
#include <string>

namespace pnf {

/// Shape or instance mismatch between vectors and graphs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver failed to reach the requested residual.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double achieved_residual)
      : std::runtime_error(what), achieved_residual(achieved_residual) {}
  double achieved_residual = 0.0;
};

/// Demand vector does not balance (globally or per component).
class InfeasibleDemand : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Text-format parse error with 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line(line) {}
  int line = 0;
};

}  // namespace pnf
