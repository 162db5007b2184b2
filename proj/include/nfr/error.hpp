#pragma once

#include <stdexcept>
#include <string>

namespace nfr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input violates a precondition: malformed file, dimension mismatch,
/// out-of-range parameter, inconsistent fingerprints.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed serialized data. Carries the offending line or byte offset in
/// the message.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A numerical routine failed (non-finite loss, degenerate data).
class ComputationError : public Error {
public:
    using Error::Error;
};

}  // namespace nfr
