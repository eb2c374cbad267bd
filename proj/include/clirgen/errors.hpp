#pragma once

#include <stdexcept>
#include <string>

namespace clirgen {

/// Invalid configuration or violated precondition. Maps to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Data-integrity failure in an input or stage artifact. Maps to exit code 1.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace clirgen
