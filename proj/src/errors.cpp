#include "errors.hpp"

namespace synthctl {

const char* error_class_name(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::Io: return "IoError";
    case ErrorClass::MalformedRow: return "MalformedRow";
    case ErrorClass::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorClass::DuplicateCell: return "DuplicateCell";
    case ErrorClass::NonNumericValue: return "NonNumericValue";
    case ErrorClass::TreatedUnitExcluded: return "TreatedUnitExcluded";
    case ErrorClass::EmptyDonorPool: return "EmptyDonorPool";
    case ErrorClass::EmptyWindow: return "EmptyWindow";
    case ErrorClass::WindowError: return "WindowError";
    case ErrorClass::PredictorAllMissing: return "PredictorAllMissing";
    case ErrorClass::SolverDiverged: return "SolverDiverged";
    case ErrorClass::ZeroSyntheticValue: return "ZeroSyntheticValue";
    case ErrorClass::AllPlacebosFiltered: return "AllPlacebosFiltered";
    case ErrorClass::ZeroPreRmspe: return "ZeroPreRMSPE";
    case ErrorClass::SeriesTooShort: return "SeriesTooShort";
    case ErrorClass::ConstantSeries: return "ConstantSeries";
    case ErrorClass::ZeroMeanOutcome: return "ZeroMeanOutcome";
    case ErrorClass::EmptyInput: return "EmptyInput";
    case ErrorClass::TooFewWeights: return "TooFewWeights";
    case ErrorClass::DimensionMismatch: return "DimensionMismatch";
    case ErrorClass::HorizonTooLong: return "HorizonTooLong";
    case ErrorClass::GridTooCoarse: return "GridTooCoarse";
    case ErrorClass::ConfigError: return "ConfigError";
    case ErrorClass::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace synthctl
