#pragma once

#include <stdexcept>
#include <string>

namespace windscale {

/// Base class for every error raised by the library. The CLI maps any
/// `windscale::Error` to a nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes or channel lists do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A crop or reduction offset is not aligned to the coarse grid.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// An index or window falls outside the domain.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value, unknown preset, degenerate statistics.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or spectral bins that cannot be compared in log space.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing, truncated or malformed file.
class FileError : public Error {
 public:
  using Error::Error;
};

}  // namespace windscale
