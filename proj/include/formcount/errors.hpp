#pragma once

#include <stdexcept>
#include <string>

namespace formcount {

/// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "dimension_mismatch"; }
};

class SingularMatrix : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "singular_matrix"; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

/// A form value overflowed (non-finite double or 128-bit integer overflow).
class OverflowError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "overflow"; }
};

class InternalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "internal"; }
};

} // namespace formcount
