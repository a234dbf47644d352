// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lenctl {

/// Base of every error raised by the library. The CLI maps the `kind()`
/// string into its one-line error report.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define LENCTL_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  }

LENCTL_DEFINE_ERROR(DimensionError, "dimension");
LENCTL_DEFINE_ERROR(RangeError, "range");
LENCTL_DEFINE_ERROR(IndexError, "index");
LENCTL_DEFINE_ERROR(ContractError, "contract");
LENCTL_DEFINE_ERROR(ConfigError, "config");
LENCTL_DEFINE_ERROR(NumericError, "numeric");
LENCTL_DEFINE_ERROR(SpecError, "spec");
LENCTL_DEFINE_ERROR(LoadError, "load");
LENCTL_DEFINE_ERROR(IoError, "io");

#undef LENCTL_DEFINE_ERROR

/// Writes a warning line to stderr. Used for recoverable conditions
/// (clamped targets, UNK substitution, rank-deficient ICA input).
void warn(const std::string& message);

}  // namespace lenctl
