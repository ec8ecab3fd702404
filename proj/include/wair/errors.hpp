#ifndef WAIR_ERRORS_HPP
#define WAIR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wair {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Euler pitch too close to +-pi/2 for the rate matrix to be inverted.
class GimbalProximity : public Error {
public:
    using Error::Error;
};

/// Stance contact Jacobian lost rank (e.g. two coincident footholds).
class SingularKKT : public Error {
public:
    using Error::Error;
};

/// A stance foot has moved away from its anchor beyond tolerance.
class PreconditionDrift : public Error {
public:
    using Error::Error;
};

class NoStanceFeet : public Error {
public:
    using Error::Error;
};

class NoReachableFoothold : public Error {
public:
    using Error::Error;
};

/// A contact switch falls strictly inside a collocation interval.
class GridMisaligned : public Error {
public:
    using Error::Error;
};

class IntegrationDiverged : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value. `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace wair

#endif  // WAIR_ERRORS_HPP
