#pragma once

#include <stdexcept>
#include <string>

namespace p2p {

// Every failure raised by the library derives from Error so callers can catch
// the whole family; the concrete type names the failure class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define P2P_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

P2P_DEFINE_ERROR(ShapeError);
P2P_DEFINE_ERROR(DegenerateRotation);
P2P_DEFINE_ERROR(InvalidRotation);
P2P_DEFINE_ERROR(InvalidSkeleton);
P2P_DEFINE_ERROR(DatasetFormatError);
P2P_DEFINE_ERROR(EmptySegmentation);
P2P_DEFINE_ERROR(EmptyResult);
P2P_DEFINE_ERROR(EmptyInput);
P2P_DEFINE_ERROR(NumericalError);
P2P_DEFINE_ERROR(ConfigError);
P2P_DEFINE_ERROR(IoError);

#undef P2P_DEFINE_ERROR

}  // namespace p2p
