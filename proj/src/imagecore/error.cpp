#include "endoagent/error.hpp"

namespace endoagent {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::KernelExceedsImage: return "KernelExceedsImage";
    case ErrorCode::SeverityUnsupported: return "SeverityUnsupported";
    case ErrorCode::InsufficientSourceImages: return "InsufficientSourceImages";
    case ErrorCode::InvalidTemperature: return "InvalidTemperature";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InsufficientExemplars: return "InsufficientExemplars";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::EncodingFailure: return "EncodingFailure";
    case ErrorCode::PromptTooLarge: return "PromptTooLarge";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::NoModelForLabel: return "NoModelForLabel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IncompleteRun: return "IncompleteRun";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace endoagent
