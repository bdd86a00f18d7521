#pragma once

#include <stdexcept>
#include <string>

namespace dncshap {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension disagreements.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed files (WAV/PNM/CSV/JSON/checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad arguments or inputs supplied by a caller/CLI user.
class UserError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace dncshap
