#include "limi/error.hpp"

namespace limi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::OutOfDomainValue: return "OutOfDomainValue";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::BridgeFailure: return "BridgeFailure";
    case ErrorCode::BoundaryUnlearnable: return "BoundaryUnlearnable";
    case ErrorCode::OneClassSample: return "OneClassSample";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::UndefinedRate: return "UndefinedRate";
    case ErrorCode::ZeroElapsed: return "ZeroElapsed";
    case ErrorCode::InsufficientInstances: return "InsufficientInstances";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ErrorFamily family_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSchema:
    case ErrorCode::MissingColumn:
    case ErrorCode::OutOfDomainValue:
    case ErrorCode::BadLabel:
    case ErrorCode::Io:
      return ErrorFamily::Data;
    case ErrorCode::DegenerateColumn:
      return ErrorFamily::Generator;
    case ErrorCode::SingleClassDataset:
      return ErrorFamily::Model;
    case ErrorCode::BridgeFailure:
      return ErrorFamily::Bridge;
    case ErrorCode::BoundaryUnlearnable:
    case ErrorCode::OneClassSample:
      return ErrorFamily::Boundary;
    case ErrorCode::NoConvergence:
      return ErrorFamily::Probe;
    case ErrorCode::EmptySample:
    case ErrorCode::ConstantColumn:
    case ErrorCode::EmptyGroup:
    case ErrorCode::UndefinedRate:
    case ErrorCode::ZeroElapsed:
      return ErrorFamily::Metric;
    case ErrorCode::InsufficientInstances:
    case ErrorCode::InvalidConfig:
      return ErrorFamily::Pipeline;
  }
  return ErrorFamily::Pipeline;
}

}  // namespace limi
