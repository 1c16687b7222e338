#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace confattr {

enum class ErrorCode {
  MissingColumn,
  NonNumericCell,
  EmptyArm,
  NonBinaryTreatment,
  WidthMismatch,
  InvalidDataset,
  InvalidSpec,
  LengthMismatch,
  EmptyTrainingSet,
  CellCardinalityExceeded,
  DimensionTooLarge,
  BudgetTooSmall,
  SingularSystem,
  ZeroMassSubgroup,
  DegenerateArm,
  IncompleteTable,
  ZeroTotalMass,
  EmptyConfounderSet,
  InconsistentWidth,
  NoGroundTruth,
  MissingRuns,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every contract violation in the library.
/// The code identifies the failure class; the message carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace confattr
