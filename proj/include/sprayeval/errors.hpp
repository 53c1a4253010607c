#pragma once

#include <stdexcept>
#include <string>

namespace sprayeval {

// Exceptions thrown across the library. The CLI maps them to exit codes:
// ConfigError -> 2, DataError family -> 3, TransportError family -> 4.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

// Magic, version or header layout of a binary file is wrong.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

// Header is valid but the payload disagrees with it.
class CorruptionError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ClassAbsentError : public Error {
public:
    explicit ClassAbsentError(int class_id)
        : Error("class " + std::to_string(class_id) + " is not predicted on the image"),
          class_id_(class_id) {}
    int class_id() const { return class_id_; }

private:
    int class_id_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

// The engine process went away (EOF or broken pipe).
class EngineLostError : public TransportError {
public:
    using TransportError::TransportError;
};

}  // namespace sprayeval
