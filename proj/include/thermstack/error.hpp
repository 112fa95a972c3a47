#pragma once

#include <stdexcept>
#include <string>

namespace thermstack {

/// Exit status categories used by the command-line front end.
enum class ErrorKind { validation = 1, solver = 2, io = 3 };

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad input: violated precondition, malformed file, inconsistent configuration.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// Input value outside the mathematical domain of an operation.
class DomainError : public ValidationError {
public:
    explicit DomainError(const std::string& what) : ValidationError(what) {}
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, int line, const std::string& what)
        : ValidationError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A power grid or offset does not fit inside the die it is bound to.
class PlacementError : public ValidationError {
public:
    explicit PlacementError(const std::string& what) : ValidationError(what) {}
};

class SolverError : public Error {
public:
    explicit SolverError(const std::string& what, double residual = -1.0)
        : Error(ErrorKind::solver, what), residual_(residual) {}
    /// Residual reached before giving up, or -1 when not applicable.
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

} // namespace thermstack
