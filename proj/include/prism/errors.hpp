#pragma once

#include <stdexcept>
#include <string>

namespace prism {

// Precondition violations: bad arguments, invalid configuration values.
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Runtime failures inside the simulation engine (non-finite state,
// degenerate protocols, solver breakdown).
struct engine_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structured-input parsing failures; line/column are 1-based when known.
struct parse_error : std::runtime_error {
  int line = 0;
  int column = 0;
  explicit parse_error(const std::string& msg, int line_ = 0, int column_ = 0)
      : std::runtime_error(msg), line(line_), column(column_) {}
};

}  // namespace prism
