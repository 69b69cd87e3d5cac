#pragma once
#include <stdexcept>
#include <string>

namespace volfn {

// Error taxonomy, mirrored by the CLI exit codes:
//   ConfigError -> 2, DataError -> 3, NumericError (and anything else) -> 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace volfn
