#pragma once

#include <stdexcept>
#include <string>

namespace specreg {

enum class ErrorKind {
  Usage,
  Validation,
  Index,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  InvariantViolation,
  Checksum,
  Io,
  RankDeficient,
  StepSize,
  NonFinite,
  State,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Index: return "index";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::Io: return "io";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::StepSize: return "step-size";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::State: return "state";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Numerical failures are distinguished from bad input by the CLI.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::RankDeficient || kind_ == ErrorKind::StepSize ||
           kind_ == ErrorKind::NonFinite;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message,
                    ErrorKind kind = ErrorKind::Validation) {
  if (!condition) fail(kind, message);
}

}  // namespace specreg
