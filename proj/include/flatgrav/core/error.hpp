#pragma once

#include <stdexcept>
#include <string>

namespace flatgrav {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (e.g. negative density).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Tabulated model evaluated beyond its last sample.
class ExtrapolationError : public Error {
public:
    using Error::Error;
};

/// Convex model violates convexity, superlinearity or normalization.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Lifted model does not reproduce the reduced model it is paired with.
class ModelMismatchError : public Error {
public:
    using Error::Error;
};

/// Requested accuracy not reached; carries the achieved error.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double achieved)
        : Error(what + " (achieved " + std::to_string(achieved) + ")"), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Two fields on incompatible grids.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Field support too large for the computational box.
class BoxError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

/// Invalid solver configuration, e.g. a failed mass bracket.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration keeps increasing the functional.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Rejection sampler with a hopeless acceptance rate.
class EnvelopeError : public Error {
public:
    using Error::Error;
};

/// Batch finished with some members failing; the message lists them.
class PartialResultError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace flatgrav
