#pragma once

#include <stdexcept>
#include <string>

namespace subfinsler {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point or node lies outside the grid's bounding box.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or inconsistent file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// An input violates a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// An iterative refinement failed to converge; carries its best lower bound.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double best_lower_bound)
      : Error(what), best_lower_bound_(best_lower_bound) {}
  double best_lower_bound() const { return best_lower_bound_; }

 private:
  double best_lower_bound_;
};

// A trajectory left the grid box at the given time.
class BoxExitError : public Error {
 public:
  BoxExitError(const std::string& what, double exit_time)
      : Error(what), exit_time_(exit_time) {}
  double exit_time() const { return exit_time_; }

 private:
  double exit_time_;
};

// No field of a vector-field set matches the curve velocity at the given time.
class NoMatchingFieldError : public Error {
 public:
  NoMatchingFieldError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// A time step exceeds the stability bound of the wave integrator.
class CflError : public Error {
 public:
  CflError(const std::string& what, double max_dt)
      : Error(what), max_dt_(max_dt) {}
  double max_dt() const { return max_dt_; }

 private:
  double max_dt_;
};

// The wave integrator detected energy growth.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

// A symbol was required to be formally self-adjoint and is not.
class NotSelfAdjointError : public Error {
 public:
  using Error::Error;
};

}  // namespace subfinsler
