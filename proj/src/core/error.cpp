#include "confattr/error.hpp"

namespace confattr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::CellCardinalityExceeded: return "CellCardinalityExceeded";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ZeroMassSubgroup: return "ZeroMassSubgroup";
    case ErrorCode::DegenerateArm: return "DegenerateArm";
    case ErrorCode::IncompleteTable: return "IncompleteTable";
    case ErrorCode::ZeroTotalMass: return "ZeroTotalMass";
    case ErrorCode::EmptyConfounderSet: return "EmptyConfounderSet";
    case ErrorCode::InconsistentWidth: return "InconsistentWidth";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::MissingRuns: return "MissingRuns";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace confattr
