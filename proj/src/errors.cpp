#include "cmelr/errors.hpp"

namespace cmelr {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPsdInput: return "NonPsdInput";
    case ErrorCode::InvalidTolerance: return "InvalidTolerance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidMaturity: return "InvalidMaturity";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidContract: return "InvalidContract";
    case ErrorCode::PriceOutOfBounds: return "PriceOutOfBounds";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cmelr
