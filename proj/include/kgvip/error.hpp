// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#pragma once

#include <stdexcept>
#include <string>

namespace kgvip {

// Exception hierarchy. The CLI maps DataError to exit code 2 and
// GatewayError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: graph files, vectors, manifests,
// scene graphs, configuration values.
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures while reading or writing artifacts.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

// A single model output that failed JSON parsing or schema validation.
// Retry loops catch this type and re-prompt.
class OutputParseError : public DataError {
 public:
  using DataError::DataError;
};

// Anything between us and the model: transport failures, non-2xx
// responses, cassette misses, exhausted retry budgets.
class GatewayError : public Error {
 public:
  using Error::Error;
};

class DigestMissError : public GatewayError {
 public:
  explicit DigestMissError(std::string digest)
      : GatewayError("cassette digest miss: " + digest), digest_(std::move(digest)) {}

  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

// The model kept producing unusable output for R+1 attempts.
class ModelOutputError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

}  // namespace kgvip
