#pragma once

#include <stdexcept>
#include <string>

namespace rosanna {

// Exit codes used by the CLI: 0 success, 1 usage, 2 I/O, 3 invariant violation.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitInvariant = 3,
};

/// Bad parameters or malformed requests (maps to exit code 1).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-system and format failures (maps to exit code 2).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated internal contract, e.g. arithmetic overflow (maps to exit code 3).
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rosanna
