#pragma once

#include <stdexcept>
#include <string>

namespace synthctl {

// Error taxonomy shared by the core library, the C API (as status codes)
// and the CLI (as machine-parsable error classes).
enum class ErrorClass {
  Io,
  MalformedRow,
  UnbalancedPanel,
  DuplicateCell,
  NonNumericValue,
  TreatedUnitExcluded,
  EmptyDonorPool,
  EmptyWindow,
  WindowError,
  PredictorAllMissing,
  SolverDiverged,
  ZeroSyntheticValue,
  AllPlacebosFiltered,
  ZeroPreRmspe,
  SeriesTooShort,
  ConstantSeries,
  ZeroMeanOutcome,
  EmptyInput,
  TooFewWeights,
  DimensionMismatch,
  HorizonTooLong,
  GridTooCoarse,
  ConfigError,
  InvalidArgument,
};

const char* error_class_name(ErrorClass cls) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& message)
      : std::runtime_error(message), cls_(cls) {}

  ErrorClass cls() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

[[noreturn]] inline void raise(ErrorClass cls, const std::string& message) {
  throw Error(cls, message);
}

}  // namespace synthctl
