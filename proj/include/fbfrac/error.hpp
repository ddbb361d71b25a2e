#pragma once

#include <stdexcept>
#include <string>

namespace fbfrac {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  success = 0,
  io = 2,
  validation = 3,
  divergence = 4,
  non_convergence = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::validation, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what)
      : Error(ExitCode::divergence, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(double residual, const std::string& what)
      : Error(ExitCode::non_convergence, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace fbfrac
