#pragma once

#include <stdexcept>
#include <string>

namespace apg {

// Error classes. The numeric values double as CLI exit codes, so keep them
// stable.
enum class ErrorCode : int {
  kInvalidFeature = 10,
  kWidthMismatch = 11,
  kUnknownAction = 12,
  kPrecondition = 13,
  kEmptySet = 14,
  kMissingPolicy = 15,
  kMissingValue = 16,
  kDivergence = 17,
  kGenerationBudget = 18,
  kUndefinedGap = 19,
  kClassification = 20,
  kParse = 30,
  kVersion = 31,
  kSchema = 32,
  kIo = 40,
  kInvalidArgument = 50,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace apg
