#pragma once

#include <stdexcept>
#include <string>

namespace eca {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shapes of operands do not agree.
struct DimensionError : Error {
    using Error::Error;
};

/// A vector required to be nonzero has (numerically) zero norm.
struct DegenerateVectorError : Error {
    using Error::Error;
};

/// Data carries no usable variance (constant column, zero total variance).
struct DegenerateDataError : Error {
    using Error::Error;
};

/// A document or file does not follow its expected format.
struct FormatError : Error {
    using Error::Error;
};

/// A computation produced (or received) non-finite values.
struct NumericsError : Error {
    using Error::Error;
};

/// Invalid option or hyperparameter value.
struct ConfigError : Error {
    using Error::Error;
};

/// Operation requires state that has not been established (e.g. unfitted model).
struct StateError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace eca
