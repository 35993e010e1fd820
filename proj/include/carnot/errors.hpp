#ifndef CARNOT_ERRORS_HPP
#define CARNOT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace carnot {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed inputs: dimension mismatches, bad matrices, unparsable files.
struct StructuralError : Error {
  using Error::Error;
};

// Precondition violations on otherwise well-formed inputs (lambda <= 0,
// t >= s, point on the characteristic set, too few scales, ...).
struct DomainError : Error {
  using Error::Error;
};

// A computation ran but could not certify its result: refinement levels
// disagree, step size underflow, Cauchy check failed.
struct AccuracyError : Error {
  using Error::Error;
};

// Radial flow entered the characteristic band.
struct FlowSingularityError : AccuracyError {
  using AccuracyError::AccuracyError;
};

}  // namespace carnot

#endif
