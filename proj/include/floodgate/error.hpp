#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace floodgate {

enum class ErrorCode {
  UnknownLabel,
  EmptyClass,
  BadRatios,
  EmptyDataset,
  MalformedRow,
  DimensionMismatch,
  EmptyBatch,
  NonFiniteLoss,
  BadMagic,
  VersionMismatch,
  CorruptModel,
  InvalidClass,
  EmptyMatrix,
  TruncatedRecord,
  UnsupportedLinkType,
  FrameTooLarge,
  UnsortedInput,
  EmptyWindow,
  OverlappingTruth,
  BadConfig,
  Io,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::InvalidClass: return "InvalidClass";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorCode::FrameTooLarge: return "FrameTooLarge";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::OverlappingTruth: return "OverlappingTruth";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace floodgate
