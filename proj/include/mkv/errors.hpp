#pragma once

#include <stdexcept>
#include <string>

namespace mkv {

// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MKV_DEFINE_ERROR(Name)                 \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(std::string(#Name ": ") + what) {} \
  }

MKV_DEFINE_ERROR(BoundViolation);
MKV_DEFINE_ERROR(ShapeError);
MKV_DEFINE_ERROR(NonFinite);
MKV_DEFINE_ERROR(SeedCollision);
MKV_DEFINE_ERROR(IndexOverflow);
MKV_DEFINE_ERROR(EmptyInput);
MKV_DEFINE_ERROR(EdgeMismatch);
MKV_DEFINE_ERROR(GridMismatch);
MKV_DEFINE_ERROR(InsufficientIterations);
MKV_DEFINE_ERROR(InsufficientExceedances);
MKV_DEFINE_ERROR(CflViolation);
MKV_DEFINE_ERROR(BoundaryMassError);
MKV_DEFINE_ERROR(ConfigError);
MKV_DEFINE_ERROR(IoError);
MKV_DEFINE_ERROR(SchemaViolation);
MKV_DEFINE_ERROR(PreconditionError);

#undef MKV_DEFINE_ERROR

}  // namespace mkv
