#pragma once

#include <stdexcept>
#include <string>

namespace dsnet {

/// Thrown when an operation's shape/value contract is violated by the caller.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown for invalid configuration (bad kernel/padding combinations,
/// unknown config keys, out-of-range settings).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when a file cannot be read, parsed, or fails validation.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dsnet
