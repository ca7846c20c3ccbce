#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (bad vocab size, empty corpus, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller passed an argument outside an operation's domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Two objects that must agree (vocabularies, shapes) do not.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Checkpoint lookup or registry I/O failure.
class RegistryError : public Error {
public:
    using Error::Error;
};

/// Outcomes cannot be paired across methods (misaligned examples or seeds).
class PairingError : public Error {
public:
    using Error::Error;
};

/// Token sequence cannot be decoded.
class DecodeError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace forge
