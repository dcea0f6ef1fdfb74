#pragma once

#include <stdexcept>
#include <string>

namespace driftlab {

/// Failure categories. The CLI maps them onto exit codes.
enum class ErrorKind {
  Validation,  // bad input: shapes, amplitudes, dimensions, config keys
  Numerical,   // solver breakdown, non-convergence, sentinel violations
  Budget,      // requested work exceeds configured caps
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string tag, const std::string& what)
      : std::runtime_error(what), kind_(kind), tag_(std::move(tag)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable name, e.g. "AmplitudeError".
  const std::string& tag() const noexcept { return tag_; }

 private:
  ErrorKind kind_;
  std::string tag_;
};

#define DRIFTLAB_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(Kind, #Name, what) {}   \
  };

DRIFTLAB_DEFINE_ERROR(ValidationError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(AmplitudeError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(ShapeError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(DimensionError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(ZeroVError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(ZeroDenominatorError, ErrorKind::Validation)
DRIFTLAB_DEFINE_ERROR(SingularError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(ConvergenceError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(NonPositiveError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(QuadratureError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(NoModeError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(SearchFailed, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(ConsistencyError, ErrorKind::Numerical)
DRIFTLAB_DEFINE_ERROR(BudgetError, ErrorKind::Budget)

#undef DRIFTLAB_DEFINE_ERROR

}  // namespace driftlab
