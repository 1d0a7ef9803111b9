#pragma once

#include <stdexcept>
#include <string>

namespace skkt {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A user callback returned a NaN/Inf or a value of the wrong shape.
/// Carries the index of the offending component when known (-1 otherwise).
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what, int component = -1)
      : Error(what), component_(component) {}
  int component() const noexcept { return component_; }

 private:
  int component_;
};

/// Problem data violates a structural invariant (dimensions, definiteness,
/// missing callbacks, non-symmetric cost matrix, ...).
class InvalidProblem : public Error {
 public:
  using Error::Error;
};

/// A data file could not be parsed; the message carries position/field context.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A factorization or solve failed numerically (singular or ill-conditioned
/// matrix, bisection failing to converge, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must have full row rank is rank deficient.
class RankError : public Error {
 public:
  using Error::Error;
};

/// A structurally invalid request: malformed index sets, more simultaneous
/// constraints demanded than the dimension admits, and similar.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// The initial point violates an inequality constraint.
class InfeasibleStart : public Error {
 public:
  using Error::Error;
};

/// The switching logic exceeded the configured event cap, indicating
/// active-set chatter.
class ChatterGuard : public Error {
 public:
  using Error::Error;
};

/// A sampling region produced no usable samples.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// The requested computation needs data or preconditions that are absent
/// (missing Hessian with finite differences disabled, failed certificate, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A constraint system admits no feasible candidate at all.
class InfeasibleProblem : public Error {
 public:
  using Error::Error;
};

}  // namespace skkt
