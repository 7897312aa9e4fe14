#pragma once

#include <stdexcept>
#include <string>

namespace vadeers {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, bad config value).
class ContractError : public Error {
public:
    using Error::Error;
};

/// An index (mixture component, guiding label, row) is out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CSV, manifest, checkpoint).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared during a computation.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace vadeers
