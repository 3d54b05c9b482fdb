#pragma once

#include <stdexcept>
#include <string>

namespace vpfd {

// Error categories mapped to CLI exit codes (see tools/main.cpp):
//   ConfigError     -> 2
//   DependencyError -> 3  (missing checkpoint/input; message names the expected path)
//   NumericError    -> 4  (non-finite loss, divergence)
// Everything else exits 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vpfd
