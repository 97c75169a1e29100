#pragma once

#include <stdexcept>
#include <string>

namespace cmelr {

enum class ErrorCode {
  NonPsdInput,
  InvalidTolerance,
  DimensionMismatch,
  DegenerateSample,
  SingularSystem,
  InvalidInput,
  InvalidMaturity,
  InvalidParams,
  IndexOutOfRange,
  InvalidContract,
  PriceOutOfBounds,
  MissingReference,
  NotApplicable,
  InvalidCount,
  EmptyInput,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

// Every contract violation in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cmelr
