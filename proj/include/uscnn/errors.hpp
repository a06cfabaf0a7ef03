#pragma once

#include <stdexcept>
#include <string>

namespace uscnn {

// Malformed shapes, incompatible operand extents, invalid configuration.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Missing, malformed, or truncated files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint-specific failure: bad magic, version mismatch, truncation.
struct CheckpointError : IoError {
    using IoError::IoError;
};

// Dataset directory yields no usable frame pairs.
struct DatasetError : IoError {
    using IoError::IoError;
};

// A computation produced non-finite values or exceeded a numeric tolerance.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API called in an invalid order (e.g. backward without a forward cache).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace uscnn
