#pragma once

#include <stdexcept>
#include <string>

namespace slicewise {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Accumulator or quantized magnitude reached 2^62.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// Malformed document, blob, or binary record.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace slicewise
