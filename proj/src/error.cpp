#include "cfl/error.hpp"

namespace cfl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::IndexOutOfRange: return "index-out-of-range";
    case ErrorKind::Singularity: return "evaluation-at-singularity";
    case ErrorKind::QuadratureFailure: return "quadrature-failure";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::TruncationExceeded: return "truncation-exceeded";
    case ErrorKind::ConventionFailure: return "convention-failure";
    case ErrorKind::MissingCalibration: return "missing-calibration";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::InconsistentData: return "inconsistent-data";
    case ErrorKind::DetectionFailure: return "detection-failure";
    case ErrorKind::ConfigurationInvalid: return "configuration-invalid";
    case ErrorKind::NonContraction: return "non-contraction";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace cfl
