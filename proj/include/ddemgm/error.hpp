#pragma once

#include <stdexcept>
#include <string>

namespace ddemgm {

/// Failure categories. The CLI exits with 2 for unreadable input (Parse,
/// Truncated, ChecksumMismatch, VersionMismatch) and 3 for every other kind.
enum class ErrorKind {
  Length,
  EmptyInput,
  Shape,
  NonFinite,
  NoDominantFrequency,
  EmptyModel,
  Protocol,
  MissingData,
  Stratification,
  Parse,
  VersionMismatch,
  ChecksumMismatch,
  Truncated,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Length: return "length";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::NoDominantFrequency: return "no-dominant-frequency";
    case ErrorKind::EmptyModel: return "empty-model";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::MissingData: return "missing-data";
    case ErrorKind::Stratification: return "stratification";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::VersionMismatch: return "version-mismatch";
    case ErrorKind::ChecksumMismatch: return "checksum-mismatch";
    case ErrorKind::Truncated: return "truncated";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ddemgm
