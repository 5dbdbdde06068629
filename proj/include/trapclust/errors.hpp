#pragma once

#include <stdexcept>
#include <string>

namespace trapclust {

// Process exit codes used by the CLI. Library errors carry one of these so
// the mapping lives next to the error type rather than in the tool.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kSolver = 3,
  kCapExceeded = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ExitCode::kValidation,
              line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

// Linear solver breakdown, non-convergence, or a singular system.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual = -1.0)
      : Error(ExitCode::kSolver, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// A hard size cap (exhaustive enumeration, dense assembly, walk length).
class CapExceeded : public Error {
 public:
  explicit CapExceeded(const std::string& what)
      : Error(ExitCode::kCapExceeded, what) {}
};

}  // namespace trapclust
