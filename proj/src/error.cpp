#include "mgn/error.hpp"

namespace mgn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::UnknownActivation: return "UnknownActivation";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mgn
