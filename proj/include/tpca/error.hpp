#pragma once

#include <stdexcept>
#include <string>

namespace tpca {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  ConstantColumn,
  NotCorrelation,
  DegenerateCorrelation,
  NoConvergence,
  DegenerateSpectrum,
  ZeroEigenvalue,
  DegenerateSegment,
  InsufficientHistory,
  InsufficientReplicates,
  TooFewDetections,
  Io,
  Schema,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tpca
