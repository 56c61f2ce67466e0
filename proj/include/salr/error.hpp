#pragma once

#include <stdexcept>
#include <string>

namespace salr {

// Error taxonomy shared by every module. The CLI maps each kind to an exit code.
enum class ErrorKind {
    shape,         // incompatible dimensions
    domain,        // argument outside the mathematical domain
    configuration, // invalid run-time configuration (e.g. unstable step size)
    format,        // malformed or truncated file
    corruption,    // structurally inconsistent in-memory data
    bounds,        // index range out of bounds
    verification,  // a checked invariant did not hold
    internal,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::configuration, what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class CorruptionError : public Error {
public:
    explicit CorruptionError(const std::string& what) : Error(ErrorKind::corruption, what) {}
};

class BoundsError : public Error {
public:
    explicit BoundsError(const std::string& what) : Error(ErrorKind::bounds, what) {}
};

class VerificationError : public Error {
public:
    explicit VerificationError(const std::string& what) : Error(ErrorKind::verification, what) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

} // namespace salr
