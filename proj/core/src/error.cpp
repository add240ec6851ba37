#include "saelab/error.hpp"

namespace saelab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kCheckpointFormat: return "checkpoint-format";
    case ErrorCode::kDumpFormat: return "dump-format";
    case ErrorCode::kMetadataMismatch: return "metadata-mismatch";
    case ErrorCode::kUndefinedPrecision: return "undefined-precision";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kDeadNeuron: return "dead-neuron";
    case ErrorCode::kBackend: return "backend";
    case ErrorCode::kSimulationParse: return "simulation-parse";
    case ErrorCode::kUnsupportedBackend: return "unsupported-backend";
    case ErrorCode::kSpScoreParse: return "spscore-parse";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kQuery: return "query";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace saelab
