#pragma once

#include <stdexcept>
#include <string>

namespace mimdm {

// Exit-code mapping lives in the CLI: usage/config -> 2, data/format -> 3,
// numeric failure -> 4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : UsageError {
    using UsageError::UsageError;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mimdm
