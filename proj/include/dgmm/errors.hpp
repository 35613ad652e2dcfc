#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dgmm {

// Base for every library error. `kind()` is a stable machine-readable class
// name; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DGMM_DEFINE_ERROR(Name)                                        \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}      \
  }

DGMM_DEFINE_ERROR(InvalidArgument);
DGMM_DEFINE_ERROR(ShapeMismatch);
DGMM_DEFINE_ERROR(NotPositiveDefinite);
DGMM_DEFINE_ERROR(NonPositiveVariance);
DGMM_DEFINE_ERROR(NonFiniteLoss);
DGMM_DEFINE_ERROR(EmptyTrainingSet);
DGMM_DEFINE_ERROR(ZeroVariance);
DGMM_DEFINE_ERROR(DegenerateFolds);
DGMM_DEFINE_ERROR(MissingFile);
DGMM_DEFINE_ERROR(ShapeMismatchWithManifest);
DGMM_DEFINE_ERROR(NonFiniteEntry);
DGMM_DEFINE_ERROR(InvalidConfig);
DGMM_DEFINE_ERROR(ConfigError);
DGMM_DEFINE_ERROR(DimensionMismatch);
DGMM_DEFINE_ERROR(IoError);

#undef DGMM_DEFINE_ERROR

}  // namespace dgmm
