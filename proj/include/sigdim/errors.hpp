#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sigdim {

// Base for all typed runtime errors. `name()` is a stable identifier the
// CLI prints as a single-line diagnostic ("EigenvalueCollision: ...").
class Error : public std::runtime_error {
public:
  Error(std::string name, const std::string& message)
      : std::runtime_error(name + ": " + message), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

#define SIGDIM_DEFINE_ERROR(ClassName)                       \
  class ClassName : public Error {                           \
  public:                                                    \
    explicit ClassName(const std::string& message)           \
        : Error(#ClassName, message) {}                      \
  }

SIGDIM_DEFINE_ERROR(NonFiniteInput);
SIGDIM_DEFINE_ERROR(SingularScatter);
SIGDIM_DEFINE_ERROR(IndexOutOfRange);
SIGDIM_DEFINE_ERROR(DegenerateSample);
SIGDIM_DEFINE_ERROR(NonConvergence);
SIGDIM_DEFINE_ERROR(LocationOnDatum);
SIGDIM_DEFINE_ERROR(KindMismatch);
SIGDIM_DEFINE_ERROR(EigenvalueCollision);
SIGDIM_DEFINE_ERROR(NoisePositivity);
SIGDIM_DEFINE_ERROR(CurveTooShort);
SIGDIM_DEFINE_ERROR(LengthMismatch);
SIGDIM_DEFINE_ERROR(ParseError);
SIGDIM_DEFINE_ERROR(NonMonotoneDates);
SIGDIM_DEFINE_ERROR(MissingValue);
SIGDIM_DEFINE_ERROR(IoError);
SIGDIM_DEFINE_ERROR(ConfigError);

#undef SIGDIM_DEFINE_ERROR

}  // namespace sigdim
