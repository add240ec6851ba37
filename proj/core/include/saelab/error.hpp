#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace saelab {

enum class ErrorCode {
  kInvalidInput,
  kTrainingDiverged,
  kCheckpointFormat,
  kDumpFormat,
  kMetadataMismatch,
  kUndefinedPrecision,
  kUndefinedCorrelation,
  kDeadNeuron,
  kBackend,
  kSimulationParse,
  kUnsupportedBackend,
  kSpScoreParse,
  kValidation,
  kQuery,
  kNotFound,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, const std::string& message)
      : Error(ErrorCode::kTrainingDiverged, message), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Raised by binary readers; offset is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(ErrorCode code, std::uint64_t offset, const std::string& message)
      : Error(code, message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class BackendError : public Error {
 public:
  BackendError(int attempts, const std::string& message)
      : Error(ErrorCode::kBackend, message), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class SpScoreParseError : public Error {
 public:
  SpScoreParseError(std::string raw_response, const std::string& message)
      : Error(ErrorCode::kSpScoreParse, message),
        raw_response_(std::move(raw_response)) {}
  const std::string& raw_response() const noexcept { return raw_response_; }

 private:
  std::string raw_response_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kInvalidInput, message);
}

}  // namespace saelab
