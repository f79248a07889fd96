#pragma once

#include <stdexcept>
#include <string>

namespace lbreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, sign, finiteness, size cap) failed.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel (Jacobi sweeps, active-set projection) ran out of
/// iterations before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, long iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  long iterations() const noexcept { return iterations_; }

 private:
  long iterations_;
};

/// A solver produced a non-finite iterate.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace lbreg
