#pragma once

#include <stdexcept>
#include <string>

namespace homolab {

// Error categories map onto the CLI exit codes: validation/domain problems
// exit 2, numerical failures exit 3, filesystem problems exit 4.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace homolab
