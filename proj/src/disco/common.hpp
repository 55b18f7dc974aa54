#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace disco {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  ShapeMismatch,
  NotPositiveDefinite,
  NoConvergence,
  TooFewExamples,
  UnpairedExamples,
  EmptySet,
  IndexOutOfRange,
  EmptyBuffer,
  InvalidTrajectory,
  MissingJoint,
  StaleCache,
  IoError,
  ConfigError,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TooFewExamples: return "TooFewExamples";
    case ErrorCode::UnpairedExamples: return "UnpairedExamples";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::InvalidTrajectory: return "InvalidTrajectory";
    case ErrorCode::MissingJoint: return "MissingJoint";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace disco
