#include "unbend/error.hpp"

namespace unbend {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MetadataMissing: return "MetadataMissing";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnsupportedScalarType: return "UnsupportedScalarType";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DilationBudgetExceeded: return "DilationBudgetExceeded";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::DegenerateTangent: return "DegenerateTangent";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::AntipodalNormals: return "AntipodalNormals";
    case ErrorCode::LastTwoKeyframes: return "LastTwoKeyframes";
    case ErrorCode::InvalidRig: return "InvalidRig";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::DoesNotFit: return "DoesNotFit";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::SchemaInvalid: return "SchemaInvalid";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

}  // namespace unbend
