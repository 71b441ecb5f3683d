#ifndef NONHOLO_ERRORS_HPP
#define NONHOLO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nonholo {

// Base for all library errors; `kind()` is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define NONHOLO_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}  \
    }

NONHOLO_DEFINE_ERROR(SyntaxError);
NONHOLO_DEFINE_ERROR(UnknownIdentifier);
NONHOLO_DEFINE_ERROR(DomainError);
NONHOLO_DEFINE_ERROR(NotTangent);
NONHOLO_DEFINE_ERROR(DegenerateForm);
NONHOLO_DEFINE_ERROR(NoConvergence);
NONHOLO_DEFINE_ERROR(NotClosed);
NONHOLO_DEFINE_ERROR(TangencyLoss);
NONHOLO_DEFINE_ERROR(RankDeficient);
NONHOLO_DEFINE_ERROR(OffPath);
NONHOLO_DEFINE_ERROR(TransversalityLost);
NONHOLO_DEFINE_ERROR(TubeExit);
NONHOLO_DEFINE_ERROR(NoReturn);
NONHOLO_DEFINE_ERROR(SectionDegenerate);
NONHOLO_DEFINE_ERROR(RescaleSingular);
NONHOLO_DEFINE_ERROR(SupremumUnstable);
NONHOLO_DEFINE_ERROR(StepCollapse);
NONHOLO_DEFINE_ERROR(FieldError);
NONHOLO_DEFINE_ERROR(InsufficientSamples);
NONHOLO_DEFINE_ERROR(ChartUnavailable);
NONHOLO_DEFINE_ERROR(MismatchBug);
NONHOLO_DEFINE_ERROR(SchemaError);

#undef NONHOLO_DEFINE_ERROR

} // namespace nonholo

#endif
