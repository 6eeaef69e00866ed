#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pidflow/dynamics.hpp"
#include "pidflow/graph.hpp"
#include "pidflow/integrator.hpp"
#include "pidflow/objectives.hpp"

namespace pidflow::app {

using Json = nlohmann::json;

/// One variant + gains block.
struct RunSpec {
  std::string name = "run";
  Variant variant = Variant::kFirstOrderPid;
  Gains gains;
};

struct InitSpec {
  std::optional<std::uint64_t> seed;
  std::optional<Eigen::VectorXd> x0;
  std::optional<Eigen::VectorXd> lambda0;
  std::optional<Eigen::VectorXd> v0;
};

struct OutputSpec {
  std::filesystem::path directory = "pidflow_out";
  bool emit_csv = true;
  bool emit_svg = true;
};

/// Fields shared by single runs and comparisons.
struct ProblemSpec {
  Json graph;
  Json objective;
  IntegratorConfig integrator;
  InitSpec init;
  OutputSpec output;
};

struct ExperimentConfig {
  ProblemSpec problem;
  RunSpec run;
  Json document;  // the parsed config, echoed into outputs
};

struct CompareConfig {
  ProblemSpec problem;
  std::vector<RunSpec> runs;
  Json document;
};

/// Graph, spectral data and objectives built from a ProblemSpec.
struct Problem {
  std::shared_ptr<const LaplacianBundle> bundle;
  std::shared_ptr<const ObjectiveSet> objectives;
  int n_agents = 0;
  int dim = 0;
};

/// All parse functions throw pidflow::Error with kInvalidConfig and a message
/// naming the offending field. Unknown keys are rejected. With
/// for_simulation = false the init block may omit the seed (used by `check`).
ExperimentConfig parse_experiment(const Json& document, bool for_simulation = true);
CompareConfig parse_compare(const Json& document);
Json load_json_file(const std::filesystem::path& path);

Graph build_graph(const Json& spec);
ObjectiveSet build_objectives(const Json& spec);
Problem build_problem(const ProblemSpec& spec);

/// Explicit x0 when given, otherwise uniform [-1, 1] drawn from the init seed.
SystemState initial_state(const Dynamics& dynamics, const InitSpec& init);

/// Seed recorded in outputs: the init seed, else the objective seed.
std::optional<std::uint64_t> experiment_seed(const ProblemSpec& spec);

/// 64-bit FNV-1a over the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const Json& document);

}  // namespace pidflow::app
