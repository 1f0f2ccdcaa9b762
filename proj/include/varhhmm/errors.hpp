#pragma once

#include <stdexcept>
#include <string>

namespace varhhmm {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument or model parameter (e.g. rho outside (0,1)).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Covariance not positive-definite even after regularization.
class SingularCovarianceError : public Error {
public:
    using Error::Error;
};

/// Fewer lagged observations than the model order requires.
class InsufficientHistoryError : public Error {
public:
    using Error::Error;
};

/// Observation contains NaN or infinity.
class InvalidFrameError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data; carries a line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    ParseError(const std::string& source, size_t line, const std::string& msg)
        : Error(line > 0 ? source + ":" + std::to_string(line) + ": " + msg : source + ": " + msg),
          line_(static_cast<long>(line)) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Invalid runtime configuration (e.g. k larger than the training set).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Parameter estimation could not produce a usable model.
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace varhhmm
