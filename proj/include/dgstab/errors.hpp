#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgstab {

/// Invalid arguments or violated preconditions. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace dgstab
