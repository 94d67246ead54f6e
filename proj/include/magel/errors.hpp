#pragma once

#include <stdexcept>
#include <string>

namespace magel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Pointwise inversion of a deformation (or of I + G) is ill conditioned.
class SingularDeformation : public Error {
 public:
  using Error::Error;
};

/// The magnetization left the neighbourhood of the unit sphere.
class ConstraintBlowUp : public Error {
 public:
  using Error::Error;
};

/// Integration stopped: CFL violation, NaN/Inf or another numerical failure.
/// Carries the simulation time at which it was detected.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Malformed configuration, snapshot, or other external input.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace magel
