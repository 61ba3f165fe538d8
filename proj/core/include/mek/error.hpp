#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mek {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  // imageproc
  DegenerateImage,
  InvalidTargets,
  TooFewDistinctValues,
  ImageTooSmall,
  // features
  IncompatibleDimensions,
  // classifiers
  DimensionMismatch,
  KTooLarge,
  NegativeFeature,
  SingleClassDataset,
  BadModelFile,
  // ensemble
  LengthMismatch,
  AllZeroWeights,
  MissingAccuracies,
  BudgetTooSmall,
  // evaluation
  LabelOutOfRange,
  EmptyMatrix,
  // manifest-io
  ParseError,
  DuplicatePath,
  UnknownSplit,
  ClassTooSmall,
  HeaderMismatch,
  RowSumError,
  DuplicateSampleId,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every domain failure in the library is reported through this type; the
/// code identifies the failure class and what() carries positional detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mek
