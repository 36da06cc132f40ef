#pragma once

#include <stdexcept>
#include <string>

namespace zsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, malformed JSON.
class FormatError : public Error {
  public:
    using Error::Error;
};

/// Payload shorter than its header promises.
class CorruptionError : public Error {
  public:
    using Error::Error;
};

/// Data violates a type invariant (duplicate ids, ragged vectors, ...).
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Caller passed an out-of-range or inconsistent argument.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// Architecture dimensions do not chain.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// Non-finite values in inputs, gradients, or losses.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Ids referenced by a manifest are missing from the feature tables.
class ReferentialIntegrityError : public Error {
  public:
    using Error::Error;
};

/// A stored artifact (checkpoint, split) does not fit the data it is used with.
class ArtifactMismatchError : public Error {
  public:
    using Error::Error;
};

class InternalError : public Error {
  public:
    using Error::Error;
};

}  // namespace zsl
