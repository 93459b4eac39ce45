#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace morph3d {

enum class ErrorCode {
  MalformedFile,
  UnsupportedFormat,
  EmptyMesh,
  IoFailure,
  InvalidConfig,
  UnknownId,
  EmptyRoi,
  NoConvergence,
  NoNoseFound,
  EmptyProjection,
  GridMismatch,
  InsufficientData,
  LengthMismatch,
  DegenerateSurface,
  InsufficientTraining,
  DegenerateDescriptor,
  EmptyScoreSet,
  MissingMatedSamples,
  InvalidRange,
  NoEligiblePairs,
  UsageError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a diagnostic without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace morph3d
