#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fgll {

enum class ErrorCode {
  // Input / validation errors.
  DuplicateId,
  DanglingEndpoint,
  DisconnectedGraph,
  InvalidAttribute,
  NoReservoir,
  EmptyNetwork,
  MissingSection,
  MalformedRow,
  MissingReading,
  DuplicateReading,
  UnknownNode,
  InvalidConfig,
  InvalidLayout,
  DimensionMismatch,
  DuplicateVariable,
  UnknownVariable,
  WindowTooShort,
  WindowMismatch,
  EmptyRanking,
  IoError,
  // Numerical failures.
  NonConvergence,
  SingularJacobian,
  SingularSystem,
  NumericalFault,
  NonFinite,
};

std::string_view to_string(ErrorCode code);

/// True for failures of a numerical procedure rather than of the inputs.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fgll
