#ifndef HML_ERRORS_HPP
#define HML_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hml {

// Base class for all numerical/domain failures raised by the library.
// The CLI maps these to exit code 3 (config problems are detected earlier
// and map to exit code 2).
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define HML_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                             \
      public:                                                               \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}\
    }

HML_DEFINE_ERROR(UnboundedPolytope);
HML_DEFINE_ERROR(EmptyInterior);
HML_DEFINE_ERROR(BoundaryEvaluation);
HML_DEFINE_ERROR(NoConvergence);
HML_DEFINE_ERROR(DegenerateMetric);
HML_DEFINE_ERROR(AmplitudeTooLarge);
HML_DEFINE_ERROR(ChartDegenerate);
HML_DEFINE_ERROR(OutOfChart);
HML_DEFINE_ERROR(FlowFailure);
HML_DEFINE_ERROR(LeftRegion);
HML_DEFINE_ERROR(StepUnderflow);
HML_DEFINE_ERROR(MaxIterations);
HML_DEFINE_ERROR(LinearSolveStagnation);
HML_DEFINE_ERROR(PoissonNoConvergence);
HML_DEFINE_ERROR(NoMinimum);
HML_DEFINE_ERROR(NotConvex);
HML_DEFINE_ERROR(RootNotFound);
HML_DEFINE_ERROR(ExitedRegion);
HML_DEFINE_ERROR(StepTooSmall);
HML_DEFINE_ERROR(UnsupportedExpression);
HML_DEFINE_ERROR(ConfigError);

#undef HML_DEFINE_ERROR

} // namespace hml

#endif
