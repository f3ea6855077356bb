#pragma once

#include <stdexcept>
#include <string>

namespace cma {

// Every failure mode the library reports. The CLI prints the enum name as the
// machine-readable error code.
enum class ErrorCode {
  ZeroVector,
  DimensionMismatch,
  EmptyInput,
  NonFinite,
  DegenerateBatch,
  NonFiniteSimilarity,
  InvalidSpec,
  InsufficientData,
  EtaOutOfRange,
  EmptyIdSet,
  EmptyNegativeSet,
  TooManyGroups,
  EmptyPairPopulation,
  SizeMismatch,
  NoCompetitors,
  InvalidConfig,
  BadMagic,
  TruncatedPayload,
  UnsupportedVersion,
  IoFailure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace cma
