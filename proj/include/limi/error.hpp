#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace limi {

enum class ErrorCode {
  // data and schema
  InvalidSchema,
  MissingColumn,
  OutOfDomainValue,
  BadLabel,
  Io,
  // generator
  DegenerateColumn,
  // models
  SingleClassDataset,
  BridgeFailure,
  // surrogate
  BoundaryUnlearnable,
  OneClassSample,
  // probe
  NoConvergence,
  // metrics
  EmptySample,
  ConstantColumn,
  EmptyGroup,
  UndefinedRate,
  ZeroElapsed,
  // pipeline
  InsufficientInstances,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Error families map to distinct process exit codes in the CLI.
enum class ErrorFamily { Data = 2, Generator = 3, Model = 4, Boundary = 5, Probe = 6, Metric = 7, Pipeline = 8, Bridge = 9 };

ErrorFamily family_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorFamily family() const noexcept { return family_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace limi
