#pragma once

#include <stdexcept>
#include <string>

namespace tgb {

// Operand shapes disagree (names both operands in the message).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An embedding collapsed below the normalization floor.
struct DegenerateEmbeddingError : std::domain_error {
  using std::domain_error::domain_error;
};

// Bad or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File I/O or format failure (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure such as NaN gradients (CLI exit code 4).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tgb
