#pragma once

#include <stdexcept>
#include <string>

namespace cgt {

// Error categories map onto the CLI exit-code contract:
// usage errors -> 1, data/format errors -> 2, numeric failures -> 3.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cgt
