#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrs {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad sensor table, scenario file or other static configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A value was rejected by a bound or membership check; state is left unchanged.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-contract wire message.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class LifecycleError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class UnavailableError : public Error {
public:
    using Error::Error;
};

class InvalidSessionError : public Error {
public:
    using Error::Error;
};

class NoReferenceError : public Error {
public:
    using Error::Error;
};

class TraceError : public Error {
public:
    TraceError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace lrs
