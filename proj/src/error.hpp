#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tunes {

enum class Errc {
  // abc_core
  MissingKeyField,
  EmptyBody,
  // control
  FormOutOfRange,
  MalformedPrefix,
  InconsistentCounts,
  OutOfRange,
  // patchtok
  PatchOverflow,
  Truncated,
  UnknownChar,
  EmptyInput,
  // tensor / model
  ShapeMismatch,
  EmptyTarget,
  TooManyPatches,
  PatchTooLong,
  SequenceTooShort,
  // trainer / generate / evalbench
  NonFiniteLoss,
  InvalidPrompt,
  EmptySample,
  ConfigInfeasible,
  // plumbing
  InvalidArgument,
  Io,
  BadCheckpoint,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  // The message without the "<Code>: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingKeyField: return "MissingKeyField";
    case Errc::EmptyBody: return "EmptyBody";
    case Errc::FormOutOfRange: return "FormOutOfRange";
    case Errc::MalformedPrefix: return "MalformedPrefix";
    case Errc::InconsistentCounts: return "InconsistentCounts";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::PatchOverflow: return "PatchOverflow";
    case Errc::Truncated: return "Truncated";
    case Errc::UnknownChar: return "UnknownChar";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyTarget: return "EmptyTarget";
    case Errc::TooManyPatches: return "TooManyPatches";
    case Errc::PatchTooLong: return "PatchTooLong";
    case Errc::SequenceTooShort: return "SequenceTooShort";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::InvalidPrompt: return "InvalidPrompt";
    case Errc::EmptySample: return "EmptySample";
    case Errc::ConfigInfeasible: return "ConfigInfeasible";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::BadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

}  // namespace tunes
