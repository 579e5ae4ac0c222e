#pragma once

#include <stdexcept>
#include <string>

namespace mmfuse {

// Base of every error raised by the library. Subclasses name the contract
// that was violated so callers (and the CLI exit-code mapping) can dispatch.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MMFUSE_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

MMFUSE_DEFINE_ERROR(DimensionError);
MMFUSE_DEFINE_ERROR(SequenceTooShortError);
MMFUSE_DEFINE_ERROR(DegenerateBatchError);
MMFUSE_DEFINE_ERROR(ConfigError);
MMFUSE_DEFINE_ERROR(ContractError);
MMFUSE_DEFINE_ERROR(ValidationError);
MMFUSE_DEFINE_ERROR(SplitError);
MMFUSE_DEFINE_ERROR(MetricError);
MMFUSE_DEFINE_ERROR(TrainingError);
MMFUSE_DEFINE_ERROR(AlignmentError);
MMFUSE_DEFINE_ERROR(IoError);

#undef MMFUSE_DEFINE_ERROR

}  // namespace mmfuse
