#pragma once

#include <stdexcept>
#include <string>

namespace fmnet {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: UsageError -> 1, DataError -> 2, NumericalError -> 3.

// Bad flags, bad configuration values, misuse of an API.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent specs/parameter shapes. A kind of usage error.
struct ConfigError : UsageError {
  using UsageError::UsageError;
};

// Malformed or unreadable files, band-count mismatches, truncated payloads.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses and similar runtime numerical failures.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fmnet
