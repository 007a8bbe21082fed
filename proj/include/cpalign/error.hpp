#pragma once

#include <stdexcept>
#include <string>

namespace cpalign {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system level failures (missing file, unwritable directory, short read).
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input content (bad label line, bad magic, truncated payload).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally well-formed input that violates an invariant
/// (out-of-range class id, degenerate box, wrong level count).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A paste/injection could not be placed (no empty region left).
class PlacementError : public Error {
public:
    using Error::Error;
};

}  // namespace cpalign
