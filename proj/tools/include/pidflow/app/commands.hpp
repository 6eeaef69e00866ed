#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pidflow/analysis.hpp"
#include "pidflow/app/config.hpp"
#include "pidflow/app/output.hpp"
#include "pidflow/integrator.hpp"

namespace pidflow::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntimeFailure = 1,  // oracle failure and other numerical errors
  kExitConfigError = 2,
  kExitDivergence = 3,
};

struct CliOptions {
  std::optional<std::filesystem::path> out_dir;
  bool no_svg = false;
  bool quiet = false;
  bool json = false;  // check: print the report as JSON instead of key = value
};

/// Relative-error level used for the time-to-threshold comparisons.
inline constexpr double kReportThreshold = 1e-4;

/// Everything one integration produced, before anything is written.
struct RunOutcome {
  RunSpec spec;
  IntegrationResult result;
  MetricsSeries metrics;
  std::optional<RateFit> fit;
  std::optional<ConditionReport> condition;
  std::optional<std::string> stability_warning;
  std::optional<double> time_to_threshold;
  double wall_seconds = 0.0;
  std::optional<std::string> error;  // non-divergence failure message

  bool diverged() const noexcept { return result.divergence.has_value(); }
  bool ok() const noexcept { return !diverged() && !error; }
};

RunOutcome execute_run(const Problem& problem, const ProblemSpec& spec, const RunSpec& run);

/// First recorded time at which the series is <= threshold.
std::optional<double> first_time_below(const std::vector<double>& times,
                                       const std::vector<double>& values, double threshold);

/// Summary JSON. Wall-clock time is left out so the file is reproducible.
Json summary_json(const RunOutcome& outcome, const Provenance& provenance, const Json& config);

/// Built-in configs for `reproduce`: example1 and example1_nonconvex are run
/// configs, example2 is a compare config.
Json builtin_config(std::string_view example);

int cmd_run(const std::filesystem::path& config_path, const CliOptions& options, std::ostream& out,
            std::ostream& err);
int cmd_compare(const std::filesystem::path& config_path, const CliOptions& options,
                std::ostream& out, std::ostream& err);
int cmd_check(const std::filesystem::path& config_path, const CliOptions& options,
              std::ostream& out, std::ostream& err);
int cmd_reproduce(std::string_view example, const CliOptions& options, std::ostream& out,
                  std::ostream& err);

/// Document-level entry points shared by the file commands and reproduce.
int run_document(const Json& document, const CliOptions& options, std::ostream& out,
                 std::ostream& err, RunOutcome* outcome = nullptr);
int compare_document(const Json& document, const CliOptions& options, std::ostream& out,
                     std::ostream& err, const std::string& prefix = "comparison",
                     std::vector<RunOutcome>* outcomes = nullptr);
int check_document(const Json& document, const CliOptions& options, std::ostream& out,
                   std::ostream& err);

}  // namespace pidflow::app
