#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgmdist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Glucose reading outside the sensor range.
class RangeError : public Error {
public:
    RangeError(const std::string& what, std::string subject, std::size_t line)
        : Error(what), subject_(std::move(subject)), line_(line) {}
    const std::string& subject() const noexcept { return subject_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string subject_;
    std::size_t line_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SingularFitError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class BandwidthError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace cgmdist
