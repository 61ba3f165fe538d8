#include "mek/error.hpp"

namespace mek {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::InvalidTargets: return "InvalidTargets";
    case ErrorCode::TooFewDistinctValues: return "TooFewDistinctValues";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::IncompatibleDimensions: return "IncompatibleDimensions";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NegativeFeature: return "NegativeFeature";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::BadModelFile: return "BadModelFile";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::MissingAccuracies: return "MissingAccuracies";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePath: return "DuplicatePath";
    case ErrorCode::UnknownSplit: return "UnknownSplit";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::RowSumError: return "RowSumError";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
  }
  return "Unknown";
}

}  // namespace mek
