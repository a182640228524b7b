#pragma once

#include <stdexcept>
#include <string>

namespace bookforge {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that violates a data-model invariant (duplicate id, unknown reference).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Invalid parameters or infeasible configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The seed query matched no article title.
class NoSeedFound : public Error {
public:
    using Error::Error;
};

/// An iterative method hit its iteration cap. `residual()` is the last change observed.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A required artifact (trained models, cached datasets) is missing or stale.
class MissingArtifact : public Error {
public:
    using Error::Error;
};

} // namespace bookforge
