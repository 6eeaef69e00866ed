#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pidflow {

enum class ErrorCode {
  kInvalidTopology,
  kInvalidEdge,
  kNotConnected,
  kNumerical,
  kShape,
  kInvalidObjective,
  kInvalidBenchmark,
  kOracleFailure,
  kInvalidGains,
  kInvalidInit,
  kInvalidConfig,
  kDivergence,
  kInsufficientData,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures to exit statuses without
/// matching on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the integrator when a stage or state becomes non-finite or
/// exceeds the divergence threshold.
class DivergenceError : public Error {
 public:
  DivergenceError(double time, std::size_t component, double value, const std::string& what)
      : Error(ErrorCode::kDivergence, what), time_(time), component_(component), value_(value) {}

  double time() const noexcept { return time_; }
  std::size_t component() const noexcept { return component_; }
  double value() const noexcept { return value_; }

 private:
  double time_;
  std::size_t component_;
  double value_;
};

}  // namespace pidflow
