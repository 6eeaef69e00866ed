#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pidflow/analysis.hpp"
#include "pidflow/integrator.hpp"

namespace pidflow::app {

/// Provenance line written at the top of every artifact.
struct Provenance {
  std::string config_hash;
  std::optional<std::uint64_t> seed;
  std::string run_name;
};

inline constexpr const char* kMetricsHeader =
    "time,relative_error,consensus_error,optimality_residual,lambda_sum_drift";

/// Lines starting with '#' are comments; the first line carries provenance,
/// and a trailing "# truncated: ..." line marks a run cut short by divergence.
std::string metrics_csv(const MetricsSeries& series, const Provenance& provenance,
                        const std::optional<std::string>& truncation = std::nullopt);

/// time, then x, lambda and v components in block order (x_<agent>_<coord>,
/// 1-based).
std::string trajectory_csv(const Trajectory& trajectory, const Provenance& provenance,
                           const std::optional<std::string>& truncation = std::nullopt);

struct NamedSeries {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;
};

/// Merged table: time, then one <name>_relative_error column per run. Runs
/// that stopped early leave empty cells.
std::string comparison_csv(const std::vector<NamedSeries>& runs, const Provenance& provenance);

/// Parses a metrics CSV produced by metrics_csv.
MetricsSeries read_metrics_csv(const std::filesystem::path& path);

/// Self-contained log-scale line plot.
std::string log_plot_svg(const std::vector<NamedSeries>& series, const std::string& title,
                         const std::string& y_label, const Provenance& provenance);

void write_text(const std::filesystem::path& path, const std::string& text);

/// 17 significant digits.
std::string format_double(double value);

}  // namespace pidflow::app
