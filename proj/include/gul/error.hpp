#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gul {

enum class ErrorKind {
  DimensionMismatch,
  InvalidModel,
  SingularResolvent,
  InsufficientSamples,
  InvalidLabel,
  NonPositiveV,
  NoConvergence,
  OrderOutOfRange,
  NonFiniteEvaluation,
  SingularSystem,
  InvalidArgument,
  EmptyIntersection,
  Io,
  Parse,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::SingularResolvent: return "SingularResolvent";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::NonPositiveV: return "NonPositiveV";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::OrderOutOfRange: return "OrderOutOfRange";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Numerical failures map to exit code 2 in the CLI, everything else to 1.
  bool numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::SingularResolvent:
      case ErrorKind::NoConvergence:
      case ErrorKind::NonFiniteEvaluation:
      case ErrorKind::SingularSystem:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace gul
