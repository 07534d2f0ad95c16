#include "normscaler/error.hpp"

namespace normscaler {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SpecInvalid: return "SpecInvalid";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DegenerateInstance: return "DegenerateInstance";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::BoundaryP: return "BoundaryP";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::BracketInvalid: return "BracketInvalid";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::NonPositiveValue: return "NonPositiveValue";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace normscaler
