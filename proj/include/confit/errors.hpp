#pragma once

#include <stdexcept>
#include <string>

namespace confit {

// All library failures surface as subclasses of Error. The what() string is a
// single line of the form "<Kind>: <detail>" so callers can print it as-is.
class Error : public std::runtime_error {
 public:
  Error(const std::string& kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail) {}
};

#define CONFIT_DEFINE_ERROR(NAME, KIND)                          \
  class NAME : public Error {                                    \
   public:                                                       \
    explicit NAME(const std::string& detail) : Error(KIND, detail) {} \
  };

CONFIT_DEFINE_ERROR(ZeroNormError, "ZeroNorm")
CONFIT_DEFINE_ERROR(DimensionMismatchError, "DimensionMismatch")
CONFIT_DEFINE_ERROR(ShapeMismatchError, "ShapeMismatch")
CONFIT_DEFINE_ERROR(ParseError, "ParseError")
CONFIT_DEFINE_ERROR(InconsistentDimError, "InconsistentDim")
CONFIT_DEFINE_ERROR(UnknownLabelError, "UnknownLabel")
CONFIT_DEFINE_ERROR(InvalidSpecError, "InvalidSpec")
CONFIT_DEFINE_ERROR(InfeasibleBatchError, "InfeasibleBatch")
CONFIT_DEFINE_ERROR(NotNormalizedError, "NotNormalized")
CONFIT_DEFINE_ERROR(NoPositivePairsError, "NoPositivePairs")
CONFIT_DEFINE_ERROR(NoPositiveError, "NoPositive")
CONFIT_DEFINE_ERROR(NoNegativeError, "NoNegative")
CONFIT_DEFINE_ERROR(NonFiniteLossError, "NonFiniteLoss")
CONFIT_DEFINE_ERROR(EmptyGridError, "EmptyGrid")
CONFIT_DEFINE_ERROR(MissingClassError, "MissingClass")
CONFIT_DEFINE_ERROR(InsufficientClassesError, "InsufficientClasses")
CONFIT_DEFINE_ERROR(RankDeficientError, "RankDeficient")
CONFIT_DEFINE_ERROR(DegenerateTotalError, "DegenerateTotal")
CONFIT_DEFINE_ERROR(ArchitectureMismatchError, "ArchitectureMismatch")
CONFIT_DEFINE_ERROR(ConfigError, "ConfigError")
CONFIT_DEFINE_ERROR(IoError, "IoError")

#undef CONFIT_DEFINE_ERROR

}  // namespace confit
