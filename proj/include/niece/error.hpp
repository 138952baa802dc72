#pragma once

#include <stdexcept>
#include <string>

namespace niece {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of the arguments do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Arguments violate a documented precondition (u > d, single-class labels, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed: non-convergence, rank deficiency, separation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed input files or I/O failures.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace niece
