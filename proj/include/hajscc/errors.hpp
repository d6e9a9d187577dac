#pragma once

#include <stdexcept>
#include <string>

namespace hajscc {

// Every failure surfaced by the library derives from Error so callers can
// catch one type; the subclasses map onto distinct CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture, run config or operation setup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (non-scalar loss, empty batch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input that cannot satisfy the channel power constraint.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupt on-disk artifact (dataset file, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace hajscc
