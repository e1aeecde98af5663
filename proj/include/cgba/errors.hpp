#ifndef CGBA_ERRORS_HPP
#define CGBA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cgba {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("zero-norm vector cannot be normalized") {}
};

class OutOfHemisphere : public Error {
 public:
  OutOfHemisphere() : Error("search direction points away from the boundary point (psi > 90 deg)") {}
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted() : Error("query budget exhausted") {}
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DegenerateEstimate : public Error {
 public:
  DegenerateEstimate() : Error("probe signs cancel; normal estimate undefined") {}
};

class NoAdversarialFound : public Error {
 public:
  NoAdversarialFound() : Error("no adversarial point found within the search radius") {}
};

class NoBoundaryInDirection : public Error {
 public:
  NoBoundaryInDirection() : Error("ray does not meet the parabolic boundary (p < h cot^2 delta)") {}
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgba

#endif  // CGBA_ERRORS_HPP
