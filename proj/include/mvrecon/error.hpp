#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvrecon {

enum class ErrorCode {
  InvalidArgument = 1,
  IndexMismatch,
  DimensionMismatch,
  InvalidPixelValue,
  EmptyCamera,
  UnreadableImage,
  GapTooLarge,
  NonOverlappingViews,
  BadResolution,
  NonFiniteLoss,
  EmptySplit,
  MissingModel,
  NoCandidates,
  EmptyValidation,
  FrameTooSmall,
  UnwritablePath,
  ConfigError,
  CheckpointError,
  GapNotCalibrated,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure in the library is reported through this type. `where` names
// the module and operation ("data.ingest") so the CLI can say what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string where, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string where_;
  std::string detail_;
};

}  // namespace mvrecon
