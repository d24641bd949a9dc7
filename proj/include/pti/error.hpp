#pragma once

#include <stdexcept>
#include <string>

namespace pti {

enum class ErrorKind {
  kRange,
  kShape,
  kConfig,
  kTransport,
  kDesync,
  kModel,
  kOverflow,
  kDecryption,
  kIo,
  kInternal,
};

/// Base of every exception thrown by the library. The kind maps one-to-one
/// onto the status codes of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PTI_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Kind, what) {}    \
  };

PTI_DEFINE_ERROR(RangeError, ErrorKind::kRange)
PTI_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
PTI_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
PTI_DEFINE_ERROR(TransportError, ErrorKind::kTransport)
PTI_DEFINE_ERROR(DesyncError, ErrorKind::kDesync)
PTI_DEFINE_ERROR(ModelError, ErrorKind::kModel)
PTI_DEFINE_ERROR(OverflowError, ErrorKind::kOverflow)
PTI_DEFINE_ERROR(DecryptionError, ErrorKind::kDecryption)
PTI_DEFINE_ERROR(IoError, ErrorKind::kIo)

#undef PTI_DEFINE_ERROR

}  // namespace pti
