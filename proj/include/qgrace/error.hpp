#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qgrace {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values or degenerate vectors encountered during numeric work.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling gave up (user adjacent to every item, graph too dense).
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace qgrace
