#pragma once

#include <stdexcept>
#include <string>

namespace starnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or parameter shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value that must be finite was NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (trajectory files, checkpoints). Carries a line number
// when one is known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a structural contract (frame strides,
// checkpoint version, config mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace starnet
