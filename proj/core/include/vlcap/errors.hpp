#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vlcap {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition (non-scalar loss, N < 2, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input is well-shaped but mathematically degenerate (zero-norm vector).
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A sequence does not fit the configured maximum length.
class OverlengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// NaN/Inf where a finite number is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace vlcap
