#include "pidflow/errors.hpp"

namespace pidflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidTopology: return "invalid-topology";
    case ErrorCode::kInvalidEdge: return "invalid-edge";
    case ErrorCode::kNotConnected: return "not-connected";
    case ErrorCode::kNumerical: return "numerical-error";
    case ErrorCode::kShape: return "shape-error";
    case ErrorCode::kInvalidObjective: return "invalid-objective";
    case ErrorCode::kInvalidBenchmark: return "invalid-benchmark";
    case ErrorCode::kOracleFailure: return "oracle-failure";
    case ErrorCode::kInvalidGains: return "invalid-gains";
    case ErrorCode::kInvalidInit: return "invalid-init";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kInsufficientData: return "insufficient-data";
  }
  return "unknown";
}

}  // namespace pidflow
