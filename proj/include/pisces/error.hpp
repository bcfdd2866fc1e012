// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pisces {

// Broad failure class; the CLI maps each one to an exit code.
enum class ErrorKind {
  usage,    // invalid argument or configuration
  data,     // malformed or inconsistent input data, IO
  numeric,  // non-finite values or degenerate numerics
};

// All library failures are reported as pisces::Error. `code()` is a short
// stable identifier such as "invalid-mass" or "bad-magic"; what() starts with
// the same identifier followed by a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline void require(bool ok, ErrorKind kind, const char* code, const std::string& detail = {}) {
  if (!ok) throw Error(kind, code, detail);
}

}  // namespace pisces
