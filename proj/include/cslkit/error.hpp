// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace csl {

// Base for every error raised by the kit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or layer geometry.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A structural constraint on a block or network spec was violated.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Configuration file problems; `path()` names the offending key ("fpn.width").
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Malformed input document or binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace csl
