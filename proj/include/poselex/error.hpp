#pragma once

#include <stdexcept>
#include <string>

namespace poselex {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file content (message names the offending line).
struct ParseError : Error {
  using Error::Error;
};

// Structurally invalid data: joint-count mismatch, dimension mismatch,
// empty streams, violated type invariants.
struct SchemaError : Error {
  using Error::Error;
};

// Invalid parameters or setup: even smoothing window, k < |T|,
// missing instruction for a class, single-subject split.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values or degenerate geometry (zero scale distance).
struct NumericError : Error {
  using Error::Error;
};

// A semantic-pose symbol not present in the registered alphabet.
struct UnknownSymbolError : SchemaError {
  using SchemaError::SchemaError;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace poselex
