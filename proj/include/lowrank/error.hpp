#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lowrank {

// Base for every recoverable failure raised by the library. Nothing in the
// library aborts on bad input; callers catch these (the CLI maps them to
// exit code 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (off-diagonal residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace lowrank
