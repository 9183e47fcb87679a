#pragma once

#include <stdexcept>
#include <string>

namespace eagrl {

// Base of every error raised by the library. Each subclass names the failure
// category used in contracts (configuration error, decode error, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EAGRL_DEFINE_ERROR(Name)             \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

EAGRL_DEFINE_ERROR(ConfigError);
EAGRL_DEFINE_ERROR(ImputationError);
EAGRL_DEFINE_ERROR(SplitError);
EAGRL_DEFINE_ERROR(TrainingError);
EAGRL_DEFINE_ERROR(ShapeError);
EAGRL_DEFINE_ERROR(ArgumentError);
EAGRL_DEFINE_ERROR(VocabularyError);
EAGRL_DEFINE_ERROR(DecodeError);
EAGRL_DEFINE_ERROR(NumericError);
EAGRL_DEFINE_ERROR(ConsistencyError);
EAGRL_DEFINE_ERROR(DomainError);
EAGRL_DEFINE_ERROR(SimilarityError);
EAGRL_DEFINE_ERROR(SelectionError);
EAGRL_DEFINE_ERROR(ExtractionError);
EAGRL_DEFINE_ERROR(StageError);
EAGRL_DEFINE_ERROR(MetricError);
EAGRL_DEFINE_ERROR(EvaluationError);
EAGRL_DEFINE_ERROR(DependencyError);
EAGRL_DEFINE_ERROR(IoError);

#undef EAGRL_DEFINE_ERROR

}  // namespace eagrl
