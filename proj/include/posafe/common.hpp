#pragma once

#include <stdexcept>
#include <string>

namespace posafe {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A required variable assignment or substitution entry is missing.
struct MissingAssignmentError : Error {
    using Error::Error;
};

// Vector/matrix/region dimensions do not line up.
struct DimensionError : Error {
    using Error::Error;
};

// A parameter is outside its admissible range (negative sigma, kappa >= 1, ...).
struct InvalidParameterError : Error {
    using Error::Error;
};

// A grid request would exceed the configured point cap.
struct ResourceError : Error {
    using Error::Error;
};

// Network wiring problems: dangling ports, double assignment, width mismatch.
struct WiringError : Error {
    using Error::Error;
};

}  // namespace posafe
