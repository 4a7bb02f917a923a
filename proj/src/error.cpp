#include "tpca/error.hpp"

namespace tpca {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::NotCorrelation: return "NotCorrelation";
    case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::ZeroEigenvalue: return "ZeroEigenvalue";
    case ErrorKind::DegenerateSegment: return "DegenerateSegment";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::InsufficientReplicates: return "InsufficientReplicates";
    case ErrorKind::TooFewDetections: return "TooFewDetections";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Schema: return "Schema";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace tpca
