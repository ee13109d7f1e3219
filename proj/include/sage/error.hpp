// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sage {

/// Caller passed something that violates an operation's precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A persisted file or record failed schema or invariant checks.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Remote provider failures. `retryable()` distinguishes transport errors and
/// throttling from hard protocol failures.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}

  [[nodiscard]] bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// Raised once the retry budget of a request is spent.
class RetryExhaustedError : public std::runtime_error {
 public:
  RetryExhaustedError(const std::string& what, int attempts)
      : std::runtime_error(what), attempts_(attempts) {}

  [[nodiscard]] int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// A statistic has no defined value for the given input (constant series,
/// no pairable values, ...).
class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace sage
