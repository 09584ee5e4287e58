#pragma once

#include <stdexcept>
#include <string>

namespace cdnslice {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidQoeTarget : public Error {
public:
    explicit InvalidQoeTarget(double q_min)
        : Error("invalid QoE target " + std::to_string(q_min) + ": must satisfy 1 <= q_min < 5"),
          q_min_(q_min) {}
    double q_min() const noexcept { return q_min_; }

private:
    double q_min_;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class UnknownFlavor : public Error {
public:
    explicit UnknownFlavor(const std::string& id) : Error("unknown flavor '" + id + "'") {}
};

class TooLarge : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class StaleDecision : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class AlreadyLowest : public Error {
public:
    using Error::Error;
};

class ResourceUnavailable : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cdnslice
