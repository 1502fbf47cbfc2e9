#include "gazefuse/error.hpp"

namespace gazefuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::EmptyRecording: return "EmptyRecording";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::MissingWindow: return "MissingWindow";
    case ErrorCode::MissingFold: return "MissingFold";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::MissingTask: return "MissingTask";
    case ErrorCode::MissingSession: return "MissingSession";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateStats: return "DegenerateStats";
    case ErrorCode::NormLeakage: return "NormLeakage";
    case ErrorCode::NoFixationData: return "NoFixationData";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientGroups: return "InsufficientGroups";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::SubjectLeakage: return "SubjectLeakage";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return ErrorCategory::Config;
    case ErrorCode::Io:
      return ErrorCategory::Io;
    case ErrorCode::MalformedRow:
    case ErrorCode::NonMonotonicTime:
    case ErrorCode::EmptyRecording:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DuplicateKey:
    case ErrorCode::UnknownTask:
    case ErrorCode::InvalidValue:
    case ErrorCode::MissingWindow:
    case ErrorCode::MissingFold:
    case ErrorCode::MissingModality:
    case ErrorCode::MissingTask:
    case ErrorCode::MissingSession:
    case ErrorCode::TooShort:
    case ErrorCode::OutOfRange:
      return ErrorCategory::Validation;
    default:
      return ErrorCategory::Compute;
  }
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Io: return 3;
    case ErrorCategory::Validation: return 4;
    case ErrorCategory::Compute: return 5;
  }
  return 1;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace gazefuse
