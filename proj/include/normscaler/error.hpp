#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace normscaler {

enum class ErrorKind {
  SpecInvalid,
  DimensionMismatch,
  DomainError,
  NonFinite,
  DegenerateInstance,
  SingularGram,
  NotConverged,
  BoundaryP,
  DegenerateFit,
  BracketInvalid,
  InsufficientPoints,
  NonPositiveValue,
  IoError,
  SchemaMismatch,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library is reported as an Error carrying
// its kind, so callers (harness, CLI) can map kinds to statuses/exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace normscaler
