#pragma once

#include <stdexcept>
#include <string>

namespace ringfree {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Config,     // bad user-supplied settings
  Data,       // malformed or inconsistent input data
  Numerical,  // NaN/Inf produced during computation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define RINGFREE_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}   \
  };

RINGFREE_DEFINE_ERROR(InvalidShape, Data)
RINGFREE_DEFINE_ERROR(FormatError, Data)
RINGFREE_DEFINE_ERROR(IoError, Data)
RINGFREE_DEFINE_ERROR(DegenerateRange, Data)
RINGFREE_DEFINE_ERROR(InvalidPermutation, Data)
RINGFREE_DEFINE_ERROR(EmptyMask, Data)
RINGFREE_DEFINE_ERROR(FieldOfViewError, Data)
RINGFREE_DEFINE_ERROR(IndexError, Data)
RINGFREE_DEFINE_ERROR(InvalidRoot, Data)
RINGFREE_DEFINE_ERROR(ConfigError, Config)
RINGFREE_DEFINE_ERROR(NumericalFault, Numerical)

#undef RINGFREE_DEFINE_ERROR

}  // namespace ringfree
