// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_COMMON_ERROR_H_
#define PSEARCH_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace psearch {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters or configuration, detected before any work starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// API misuse: mismatched forms or limbs, missing key material.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Failures that depend on data or randomness (placement retries exhausted,
// malformed files, noise exhaustion).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

#define PSEARCH_CHECK(cond, ErrType, msg) \
  do {                                    \
    if (!(cond)) throw ErrType(msg);      \
  } while (0)

}  // namespace psearch

#endif  // PSEARCH_COMMON_ERROR_H_
