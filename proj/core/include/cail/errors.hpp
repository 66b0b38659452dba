#pragma once

#include <stdexcept>
#include <string>

namespace cail {

// Exit-code mapping used by the CLI: ConfigError -> 2, CorruptFileError -> 3.
// Everything else is an internal fault.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CorruptFileError : std::runtime_error {
  explicit CorruptFileError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StorageError : std::runtime_error {
  explicit StorageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BatchTooSmallError : std::runtime_error {
  explicit BatchTooSmallError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IntegrationFault : std::runtime_error {
  explicit IntegrationFault(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cail
