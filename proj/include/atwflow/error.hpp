#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atwflow {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid anisotropy or expression definition (non-SPD matrix, m(x) <= 0, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation, e.g. a gradient at p = 0.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (scenario schema, expression syntax, files).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Empty set or whole box where a set with a nonempty boundary is required.
class DegenerateSetError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// The evolving set came too close to the computational frame.
class MarginError : public Error {
 public:
  using Error::Error;
};

}  // namespace atwflow
