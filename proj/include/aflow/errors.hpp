// Error taxonomy used across the library. All are std::runtime_error so
// callers that do not care about the category can catch one type.
#pragma once

#include <stdexcept>
#include <string>

namespace aflow {

// Bad shapes, invalid options, precondition violations in configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad runtime data fed into an operation (non-finite rewards, missing files).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values produced or encountered mid-computation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mathematical domain violations (tilt positivity, zero-probability points).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file corruption or architecture mismatch.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aflow
