#pragma once

#include <stdexcept>
#include <string>

namespace mdre {

// Raised on malformed inputs: bad files, invalid shapes, broken invariants.
// The CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation goes numerically off the rails (diverging loss,
// NaN in an update). The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mdre
