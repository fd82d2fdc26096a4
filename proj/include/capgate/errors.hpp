#pragma once

#include <stdexcept>
#include <string>

namespace capgate {

// Bad parameters, malformed input files, violated preconditions.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A well-formed request that could not be computed (calibration failure,
// degenerate samples, exhausted retries).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reading or writing files failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace capgate
