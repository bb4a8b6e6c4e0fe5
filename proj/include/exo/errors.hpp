#pragma once

#include <stdexcept>
#include <string>

// Error types shared by every exo module. All derive from exo::Error so
// callers can catch the whole family at a boundary (the CLI does).

namespace exo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A value lies outside its admissible range (e.g. an ADC count > 4095).
struct RangeError : Error {
  using Error::Error;
};

/// An input sequence is too short for the requested operation.
struct SizeError : Error {
  using Error::Error;
};

/// A filter or model definition is internally inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

/// A file has the wrong shape (row/column count).
struct FormatError : Error {
  using Error::Error;
};

/// A cell or field could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

/// Tensor dimensions disagree with a layer definition.
struct ShapeError : Error {
  using Error::Error;
};

/// A dataset cannot support the requested experiment.
struct DataError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

struct UnsupportedError : Error {
  using Error::Error;
};

} // namespace exo
