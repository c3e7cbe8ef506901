#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace judgeharness {

enum class Errc {
  UnrecognizedVerdict,
  TemplateError,
  BackendUnavailable,
  ExtractionError,
  CacheMiss,
  CacheCorruption,
  InsufficientSystems,
  EmptyAxis,
  LengthMismatch,
  EmptyInput,
  NoTasksRemaining,
  DuplicateDifferingLabel,
  UnknownAssignment,
  UnknownTask,
  ConfigError,
  IoError,
  FormatError,
  DuelAborted,
  InvalidArgument,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::UnrecognizedVerdict: return "UnrecognizedVerdict";
    case Errc::TemplateError: return "TemplateError";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ExtractionError: return "ExtractionError";
    case Errc::CacheMiss: return "CacheMiss";
    case Errc::CacheCorruption: return "CacheCorruption";
    case Errc::InsufficientSystems: return "InsufficientSystems";
    case Errc::EmptyAxis: return "EmptyAxis";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoTasksRemaining: return "NoTasksRemaining";
    case Errc::DuplicateDifferingLabel: return "DuplicateDifferingLabel";
    case Errc::UnknownAssignment: return "UnknownAssignment";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
    case Errc::DuelAborted: return "DuelAborted";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can branch on the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace judgeharness
