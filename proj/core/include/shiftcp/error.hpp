#pragma once

#include <stdexcept>
#include <string>

namespace shiftcp {

// Bad input: malformed files, out-of-range scores, violated preconditions.
// The CLI maps this to exit status 2; anything else is an internal error.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A ValidationError that points at a location in an input file.
class ParseError : public ValidationError {
 public:
  ParseError(std::string path, std::size_t line, std::size_t column,
             const std::string& what)
      : ValidationError(path + ":" + std::to_string(line) +
                        (column > 0 ? ":" + std::to_string(column) : "") +
                        ": " + what),
        path_(std::move(path)),
        line_(line),
        column_(column) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }
  // 1-based column (CSV field) index, 0 when the error concerns the whole row.
  std::size_t column() const noexcept { return column_; }

 private:
  std::string path_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace shiftcp
