#include "jointkin/error.hpp"

namespace jointkin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::DegenerateAxisPair: return "DegenerateAxisPair";
    case ErrorCode::DegenerateFusion: return "DegenerateFusion";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::TimeOrderError: return "TimeOrderError";
    case ErrorCode::InvalidSample: return "InvalidSample";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::InsufficientMotion: return "InsufficientMotion";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::ImplausibleGeometry: return "ImplausibleGeometry";
    case ErrorCode::EventOutOfRange: return "EventOutOfRange";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::ZeroRange: return "ZeroRange";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::IncompleteTable: return "IncompleteTable";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace jointkin
