#pragma once

#include <stdexcept>

namespace ldmi {

// Exit codes used by the CLI; library exceptions map onto them.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitDataFormat = 3,
  kExitInternal = 4,
};

// Invalid parameter or configuration value.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable input or unwritable output.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed corpus, model, or dataset content.
struct DataFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug, not bad input.
struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace ldmi
