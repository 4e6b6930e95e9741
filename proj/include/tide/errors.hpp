#pragma once

#include <stdexcept>

namespace tide {

// Error categories map to CLI exit codes: ConfigError -> 2, NumericError -> 3,
// IoError -> 4 (see tools/tide.cpp).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tide
