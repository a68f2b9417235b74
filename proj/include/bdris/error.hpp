#pragma once

#include <stdexcept>
#include <string>

namespace bdris {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BDRIS_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

BDRIS_DEFINE_ERROR(InvalidInput);
BDRIS_DEFINE_ERROR(DimensionMismatch);
BDRIS_DEFINE_ERROR(RankDeficient);
BDRIS_DEFINE_ERROR(NotUnitary);
BDRIS_DEFINE_ERROR(BelowReferenceDistance);
BDRIS_DEFINE_ERROR(ZeroChannel);
BDRIS_DEFINE_ERROR(UnsupportedArchitecture);
BDRIS_DEFINE_ERROR(ZeroVector);
BDRIS_DEFINE_ERROR(TooLong);
BDRIS_DEFINE_ERROR(LengthMismatch);
BDRIS_DEFINE_ERROR(NonConvergence);

#undef BDRIS_DEFINE_ERROR

}  // namespace bdris
