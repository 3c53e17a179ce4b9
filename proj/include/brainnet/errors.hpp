#pragma once

#include <stdexcept>
#include <string>

namespace brainnet {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad value in otherwise well-shaped input (negative count, NaN, label out of range).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Connectivity matrix not symmetric within tolerance.
class SymmetryError : public Error {
 public:
  using Error::Error;
};

// Input whose statistics make the requested transform undefined (e.g. constant matrix).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a numeric pass.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Operation called before required state exists (empty trace, empty split).
class StateError : public Error {
 public:
  using Error::Error;
};

// Invalid synthetic-cohort or run specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Checkpoint manifest/blob pair is inconsistent or damaged.
class CorruptCheckpointError : public Error {
 public:
  using Error::Error;
};

// Bad key or value in a run configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace brainnet
