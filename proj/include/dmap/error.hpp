#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain the operation accepts.
class ParameterError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A caller-side precondition (symmetry, orthonormality) is violated.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A normalization or inverse is undefined for the given input.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// Floating-point failure: solver non-convergence, invalid powers.
class NumericError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    CapacityError(const std::string& what, std::size_t required_bytes)
        : Error(what + " (requires " + std::to_string(required_bytes) + " bytes)"),
          required_bytes_(required_bytes) {}

    [[nodiscard]] std::size_t required_bytes() const noexcept { return required_bytes_; }

private:
    std::size_t required_bytes_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IntegrationError : public NumericError {
public:
    IntegrationError(const std::string& what, std::size_t step)
        : NumericError("step " + std::to_string(step) + ": " + what), step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace dmap
