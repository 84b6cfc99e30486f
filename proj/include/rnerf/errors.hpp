#pragma once

#include <stdexcept>
#include <string>

namespace rnerf {

// Argument or configuration violates a documented precondition.
using InvalidArgument = std::invalid_argument;

// A voxel landed on the point it is rendered towards (zero travel distance).
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// NaN/inf showed up during a forward or backward pass.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset, checkpoint or config text. Carries the 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rnerf
