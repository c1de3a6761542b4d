#pragma once

#include <stdexcept>
#include <string>

namespace fedrate {

// Raised when tensor shapes disagree; the message names the offending layer.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed input files (CSV, checkpoints, configs).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedrate
