#pragma once

#include <stdexcept>
#include <string>

namespace eemo {

enum class ErrorKind {
  kParse,
  kValidation,
  kDuplicateLabel,
  kMissingField,
  kUnknownLabel,
  kDimensionMismatch,
  kDegenerate,
  kNotFound,
  kTransport,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kDuplicateLabel: return "duplicate-label";
    case ErrorKind::kMissingField: return "missing-field";
    case ErrorKind::kUnknownLabel: return "unknown-label";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kNotFound: return "not-found";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported through this type; `kind()` lets callers
// (and tests) distinguish the failure class without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace eemo
