#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eesm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Matrix inversion hit a (near-)zero pivot.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// An iterative kernel ran out of iterations.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Calibration records carry no information (every packet in the same error state).
class UninformativeDatasetError : public Error {
public:
    UninformativeDatasetError() : Error("uninformative dataset") {}
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace eesm
