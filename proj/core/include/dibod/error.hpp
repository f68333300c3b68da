// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dibod {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain of a function (e.g. log of a non-positive).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened or read.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input text parsed but does not satisfy the format rules.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent run configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dibod
