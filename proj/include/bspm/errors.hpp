#pragma once

#include <stdexcept>
#include <string>

namespace bspm {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter or configuration value (maps to CLI exit code 1).
class ParamError : public Error {
public:
    using Error::Error;
};

/// Malformed input data: parse failures, shape mismatches, non-finite
/// values, out-of-range indices (maps to CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: factorization breakdown, non-PSD Gram beyond jitter
/// escalation (maps to CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised by gplmk_weights when an active curvature term has a zero
/// denominator. Callers may fall back to uniform weights.
class FlatGeometryError : public Error {
public:
    using Error::Error;
};

} // namespace bspm
