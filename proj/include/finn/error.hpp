#pragma once

#include <stdexcept>
#include <string>

namespace finn {

// Base for every error raised by the library. Callers that only need to
// report can catch this; the CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside an operation's domain (non-finite value, negative strike,
// log of a non-positive jet, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A computation produced a non-finite or otherwise unusable number.
class NumericError : public Error {
public:
    using Error::Error;
};

// Inconsistent or invalid configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Heston parameters violate the Feller condition or a parameter bound.
class FellerError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Quadrature produced probabilities outside the admissible band.
class IntegrationError : public NumericError {
public:
    using NumericError::NumericError;
};

// Malformed, truncated or incompatible file.
class FormatError : public Error {
public:
    using Error::Error;
};

// A model, oracle and grid that do not belong together (different
// process, option kind or grid).
class MismatchError : public Error {
public:
    using Error::Error;
};

// Training aborted (non-finite loss, exploding gradient).
class TrainingAborted : public Error {
public:
    TrainingAborted(const std::string& what, int epoch, long batch)
        : Error(what), epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    long batch() const noexcept { return batch_; }

private:
    int epoch_;
    long batch_;
};

}  // namespace finn
