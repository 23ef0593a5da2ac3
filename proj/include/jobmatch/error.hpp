#pragma once

#include <stdexcept>
#include <string>

namespace jobmatch {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid basis/schema/config, bad indices, broken type invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Overflow or NaN while evaluating model quantities.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// Singular or badly conditioned linear system.
class LinearAlgebraError : public Error {
 public:
  LinearAlgebraError(const std::string& what, double rcond) : Error(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

// Collinear regressors in a least-squares problem.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace jobmatch
