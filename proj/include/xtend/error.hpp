#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xtend {

enum class ErrorKind {
  InvalidString,
  IndeterminateIntegral,
  MeshTooCoarse,
  BracketStalled,
  WrongCase,
  NonRealSpectrum,
  SupportViolation,
  BackendUnsupported,
  HorizonExceeded,
  UndeterminedKill,
  InvalidArgument,
  ParseError,
  IoError,
};

constexpr std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidString: return "InvalidString";
    case ErrorKind::IndeterminateIntegral: return "IndeterminateIntegral";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::BracketStalled: return "BracketStalled";
    case ErrorKind::WrongCase: return "WrongCase";
    case ErrorKind::NonRealSpectrum: return "NonRealSpectrum";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::BackendUnsupported: return "BackendUnsupported";
    case ErrorKind::HorizonExceeded: return "HorizonExceeded";
    case ErrorKind::UndeterminedKill: return "UndeterminedKill";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace xtend
