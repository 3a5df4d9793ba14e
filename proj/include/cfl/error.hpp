#pragma once

#include <stdexcept>
#include <string>

namespace cfl {

enum class ErrorKind {
  InvalidArgument,
  IndexOutOfRange,
  Singularity,
  QuadratureFailure,
  GridMismatch,
  TruncationExceeded,
  ConventionFailure,
  MissingCalibration,
  IllConditioned,
  InconsistentData,
  DetectionFailure,
  ConfigurationInvalid,
  NonContraction,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cfl
