// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace taskspace {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument value (bad config field, non-positive step size, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (shape mismatch, wrong label kind).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// External oracle died, timed out or could not be reached.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// External oracle sent something that does not follow the wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Two embeddings that do not live in the same space were compared.
class IncompatibleSpaceError : public Error {
 public:
  using Error::Error;
};

/// Degenerate input: all-zero embedding, empty pool after dedup, undefined rate.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace taskspace
