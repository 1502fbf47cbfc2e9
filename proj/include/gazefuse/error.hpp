#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gazefuse {

enum class ErrorCode {
  // ingestion and schema
  MalformedRow,
  NonMonotonicTime,
  EmptyRecording,
  DimensionMismatch,
  DuplicateKey,
  UnknownTask,
  InvalidValue,
  // missing inputs
  MissingWindow,
  MissingFold,
  MissingModality,
  MissingTask,
  MissingSession,
  // numerics and protocol
  TooShort,
  OutOfRange,
  DegenerateStats,
  NormLeakage,
  NoFixationData,
  ZeroVector,
  InsufficientGroups,
  AlphaOutOfRange,
  SubjectLeakage,
  EmptyClass,
  TooFewSubjects,
  // front end
  InvalidConfig,
  Io,
};

// Coarse grouping used for process exit codes.
enum class ErrorCategory { Config, Io, Validation, Compute };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

// 2 = config, 3 = io, 4 = validation, 5 = compute.
int exit_code_for(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace gazefuse
