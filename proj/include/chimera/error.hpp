// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace chimera {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes for an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside an op's domain, e.g. log of a non-positive value.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in an op result or a gradient.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Bad input data (malformed file, empty content, unknown ids).
class InputError : public Error {
 public:
  using Error::Error;
};

// Configuration validation failure; carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace chimera
