#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace persalign {

enum class ErrorCode {
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateId,
  kIndexOutOfRange,
  kInvalidConfig,
  kNonPositiveBandwidth,
  kAllZeroWeights,
  kNonFiniteWeight,
  kNonPositiveEpsilon,
  kNumericalCollapse,
  kUnconvergedPlan,
  kInstanceTooLarge,
  kEmptyInput,
  kInsufficientSamples,
  kDegenerateBandwidth,
  kConstantColumn,
  kZeroVector,
  kKOutOfRange,
  kEmptyNegativePool,
  kParseError,
  kSchemaError,
  kResponderFailure,
  kExternalServiceError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Every library failure is raised as this type; `code()` is the stable,
// machine-readable part and is what the CLI prints in its error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Re-raises with a context prefix ("stage kde: ...") and the same code.
[[noreturn]] void rethrow_with_context(const Error& err, std::string_view context);

}  // namespace persalign
