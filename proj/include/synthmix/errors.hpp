#pragma once

#include <stdexcept>
#include <string>

namespace synthmix {

enum class ErrorKind {
    InvalidInput,
    Shape,
    Precondition,
    Divergence,
    Conditioning,
    Config,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base for every error raised by the library. The kind drives the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

/// Raised when a limit is requested but the feedback operator has spectral radius >= 1.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double rho)
        : Error(ErrorKind::Divergence, what), rho_(rho) {}

    double rho() const noexcept { return rho_; }

private:
    double rho_;
};

class ConditioningError : public Error {
public:
    explicit ConditioningError(const std::string& what) : Error(ErrorKind::Conditioning, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace synthmix
