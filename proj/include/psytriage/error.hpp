#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psytriage {

enum class ErrorCode {
  // record validation
  NegativeVital,
  GcsOutOfRange,
  EmptyCaseId,
  InvalidValue,
  MissingVital,
  // ingest
  MissingKeyColumn,
  TooFewValues,
  AllOutliers,
  NonFiniteValue,
  ColumnAllMissing,
  // selection / modeling
  ZeroReference,
  DegenerateFolds,
  SingleClassTraining,
  InvalidHyperparameter,
  ArityMismatch,
  EmptyPartition,
  EmptySpace,
  LengthMismatch,
  SingleClass,
  // llm bridge
  MissingFeature,
  Transport,
  // plumbing
  InvalidConfig,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace psytriage
