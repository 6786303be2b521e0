#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unbend {

enum class ErrorCode {
  InvalidArgument,
  MetadataMissing,
  SizeMismatch,
  UnsupportedScalarType,
  EmptyMask,
  DilationBudgetExceeded,
  Disconnected,
  SolverDiverged,
  DegenerateField,
  DegenerateTangent,
  EmptyInput,
  NonConvergence,
  OutOfRange,
  AntipodalNormals,
  LastTwoKeyframes,
  InvalidRig,
  IoFailure,
  DoesNotFit,
  DimsMismatch,
  VersionUnsupported,
  SchemaInvalid,
  BindFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI, the HTTP service) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace unbend
