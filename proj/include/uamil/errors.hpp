#pragma once

#include <stdexcept>

namespace uamil {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing column/channel or mismatched names.
struct SchemaError : Error { using Error::Error; };

/// Dimension mismatch between tensors or parameter blocks.
struct ShapeError : Error { using Error::Error; };

/// Non-finite or out-of-range value.
struct ValueError : Error { using Error::Error; };

/// Series shorter than one window.
struct TooShortError : Error { using Error::Error; };

/// Degenerate statistics while fitting (e.g. zero-variance channel).
struct FitError : Error { using Error::Error; };

/// Invalid or infeasible configuration.
struct ConfigError : Error { using Error::Error; };

/// Bad dataset state: duplicate ids, failed joins, missing classes.
struct DataError : Error { using Error::Error; };

/// Metric undefined for the given input (e.g. single-class AUC).
struct MetricError : Error { using Error::Error; };

/// Filesystem-level failure.
struct IoError : Error { using Error::Error; };

/// Malformed file content.
struct ParseError : Error { using Error::Error; };

/// Checkpoint format version not supported.
struct VersionError : Error { using Error::Error; };

} // namespace uamil
