#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace endoagent {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptData,
  IoFailure,
  ParseError,
  InvariantViolation,
  InvalidArgument,
  KernelExceedsImage,
  SeverityUnsupported,
  InsufficientSourceImages,
  InvalidTemperature,
  DegenerateData,
  NonFiniteLoss,
  InsufficientExemplars,
  MissingImage,
  EncodingFailure,
  PromptTooLarge,
  BackendTimeout,
  BackendRefusal,
  ParseFailure,
  NoModelForLabel,
  DimensionMismatch,
  TooSmall,
  InsufficientCorpus,
  EmptyInput,
  IncompleteRun,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library is reported through this type. The code is
/// what callers branch on; `detail` carries free-form context such as the raw
/// backend response for audit.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace endoagent
