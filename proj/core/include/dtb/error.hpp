#pragma once

#include <stdexcept>
#include <string>

namespace dtb {

// All engine failures derive from Error so callers can catch one type and
// still dispatch on the category (the CLI maps IoError to exit code 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file or document violates its format or a data-model invariant.
class FormatError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Time index (or other index) outside the valid range.
class BoundsError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but mathematically degenerate (all-zero matrix, zero-length segment).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Two inputs that must agree in shape do not.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Generator spec that cannot be satisfied.
class SpecError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Short label for an error category, used in API error payloads.
std::string error_code(const Error& e);

}  // namespace dtb
