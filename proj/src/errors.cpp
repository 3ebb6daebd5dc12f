#include "fgll/errors.hpp"

namespace fgll {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingEndpoint: return "DanglingEndpoint";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::InvalidAttribute: return "InvalidAttribute";
    case ErrorCode::NoReservoir: return "NoReservoir";
    case ErrorCode::EmptyNetwork: return "EmptyNetwork";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::MissingReading: return "MissingReading";
    case ErrorCode::DuplicateReading: return "DuplicateReading";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidLayout: return "InvalidLayout";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateVariable: return "DuplicateVariable";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::WindowMismatch: return "WindowMismatch";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NumericalFault: return "NumericalFault";
    case ErrorCode::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvergence:
    case ErrorCode::SingularJacobian:
    case ErrorCode::SingularSystem:
    case ErrorCode::NumericalFault:
    case ErrorCode::NonFinite:
      return true;
    default:
      return false;
  }
}

}  // namespace fgll
