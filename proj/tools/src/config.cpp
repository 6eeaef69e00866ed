#include "pidflow/app/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

#include "pidflow/errors.hpp"
#include "pidflow/random.hpp"

namespace pidflow::app {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw Error(ErrorCode::kInvalidConfig, message);
}

void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path + " must be a JSON object");
}

void check_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  require_object(j, path);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key == a;
    if (!known) fail("unknown key '" + path + "." + key + "'");
  }
}

const Json& require(const Json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) {
    fail("missing required key '" + (path.empty() ? std::string() : path + ".") + key + "'");
  }
  return j.at(key);
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path + " must be a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path + " must be an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    fail(path + " must be a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

bool get_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path + " must be true or false");
  return j.get<bool>();
}

Eigen::VectorXd get_vector(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v[static_cast<Eigen::Index>(k)] = get_number(j[k], path + "[" + std::to_string(k) + "]");
  }
  return v;
}

Eigen::MatrixXd get_matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path + " must be a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = get_vector(j[r], path + "[" + std::to_string(r) + "]");
    if (static_cast<std::size_t>(row.size()) != cols) fail(path + " rows must have equal length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Gains parse_gains(const Json& j, Variant variant, const std::string& path) {
  check_keys(j, path, {"c1", "c2", "c3", "c4", "c5"});
  Gains g;
  double* fields[] = {&g.c1, &g.c2, &g.c3, &g.c4, &g.c5};
  const char* names[] = {"c1", "c2", "c3", "c4", "c5"};
  const bool needs_c5 = variant == Variant::kSecondOrderPid || variant == Variant::kCorollary;
  for (int k = 0; k < 5; ++k) {
    const std::string field_path = path + "." + names[k];
    if (!j.contains(names[k])) {
      if (k < 4 || needs_c5) fail("missing required key '" + field_path + "'");
      continue;
    }
    *fields[k] = get_number(j.at(names[k]), field_path);
  }
  const double positive[] = {g.c1, g.c2, g.c3, g.c4};
  for (int k = 0; k < 4; ++k) {
    if (!(positive[k] > 0.0)) {
      fail(path + "." + names[k] + " must be positive, got " + std::to_string(positive[k]));
    }
  }
  if (variant == Variant::kSecondOrderPid && !(g.c5 > 0.0)) {
    fail(path + ".c5 must be positive, got " + std::to_string(g.c5));
  }
  if (variant == Variant::kCorollary && !(g.c5 >= 0.0)) {
    fail(path + ".c5 must be nonnegative, got " + std::to_string(g.c5));
  }
  return g;
}

Variant parse_variant_field(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path + " must be a string");
  const auto v = parse_variant(j.get<std::string>());
  if (!v) {
    fail(path + " must be one of first_order_pid, second_order_pid, corollary, zhu2022 (got '" +
         j.get<std::string>() + "')");
  }
  return *v;
}

IntegratorConfig parse_integrator(const Json& j) {
  check_keys(j, "integrator", {"h", "t_end", "record_stride"});
  IntegratorConfig cfg;
  if (j.contains("h")) cfg.h = get_number(j.at("h"), "integrator.h");
  if (j.contains("t_end")) cfg.t_end = get_number(j.at("t_end"), "integrator.t_end");
  if (j.contains("record_stride")) {
    cfg.record_stride = get_int(j.at("record_stride"), "integrator.record_stride");
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  return cfg;
}

InitSpec parse_init(const Json& j) {
  check_keys(j, "init", {"seed", "x0", "lambda0", "v0"});
  InitSpec init;
  if (j.contains("seed")) init.seed = get_seed(j.at("seed"), "init.seed");
  if (j.contains("x0")) init.x0 = get_vector(j.at("x0"), "init.x0");
  if (j.contains("lambda0")) init.lambda0 = get_vector(j.at("lambda0"), "init.lambda0");
  if (j.contains("v0")) init.v0 = get_vector(j.at("v0"), "init.v0");
  return init;
}

OutputSpec parse_output(const Json& j) {
  check_keys(j, "output", {"directory", "emit_csv", "emit_svg"});
  OutputSpec out;
  if (j.contains("directory")) {
    if (!j.at("directory").is_string()) fail("output.directory must be a string");
    out.directory = j.at("directory").get<std::string>();
  }
  if (j.contains("emit_csv")) out.emit_csv = get_bool(j.at("emit_csv"), "output.emit_csv");
  if (j.contains("emit_svg")) out.emit_svg = get_bool(j.at("emit_svg"), "output.emit_svg");
  return out;
}

void validate_graph_spec(const Json& j) {
  require_object(j, "graph");
  const Json& type = require(j, "graph", "type");
  if (type == "ring") {
    check_keys(j, "graph", {"type", "n"});
    get_int(require(j, "graph", "n"), "graph.n");
  } else if (type == "edges") {
    check_keys(j, "graph", {"type", "n", "edges"});
    get_int(require(j, "graph", "n"), "graph.n");
    if (!require(j, "graph", "edges").is_array()) fail("graph.edges must be an array");
  } else {
    fail("graph.type must be 'ring' or 'edges'");
  }
}

void validate_objective_spec(const Json& j) {
  require_object(j, "objective");
  const Json& type = require(j, "objective", "type");
  if (type == "random_quadratic") {
    check_keys(j, "objective", {"type", "N", "n", "seed"});
    get_int(require(j, "objective", "N"), "objective.N");
    get_int(require(j, "objective", "n"), "objective.n");
    get_seed(require(j, "objective", "seed"), "objective.seed");
  } else if (type == "example1_trig") {
    check_keys(j, "objective", {"type", "seed", "n"});
    get_seed(require(j, "objective", "seed"), "objective.seed");
    if (j.contains("n")) get_int(j.at("n"), "objective.n");
  } else if (type == "quadratic_list") {
    check_keys(j, "objective", {"type", "Q", "q"});
    if (!require(j, "objective", "Q").is_array()) fail("objective.Q must be an array of matrices");
    if (!require(j, "objective", "q").is_array()) fail("objective.q must be an array of vectors");
  } else {
    fail("objective.type must be 'random_quadratic', 'example1_trig' or 'quadratic_list'");
  }
}

ProblemSpec parse_problem(const Json& doc) {
  ProblemSpec spec;
  spec.graph = require(doc, "", "graph");
  validate_graph_spec(spec.graph);
  spec.objective = require(doc, "", "objective");
  validate_objective_spec(spec.objective);
  if (doc.contains("integrator")) spec.integrator = parse_integrator(doc.at("integrator"));
  if (doc.contains("init")) spec.init = parse_init(doc.at("init"));
  if (doc.contains("output")) spec.output = parse_output(doc.at("output"));
  return spec;
}

void require_init_seed(const ProblemSpec& spec) {
  if (!spec.init.x0 && !spec.init.seed) {
    fail("init.seed is required when init.x0 is not given (x0 is drawn at random)");
  }
}

}  // namespace

ExperimentConfig parse_experiment(const Json& document, bool for_simulation) {
  check_keys(document, "config",
             {"name", "graph", "objective", "variant", "gains", "integrator", "init", "output"});
  ExperimentConfig cfg;
  cfg.document = document;
  try {
    cfg.problem = parse_problem(document);
    if (for_simulation) require_init_seed(cfg.problem);
    if (document.contains("name")) {
      if (!document.at("name").is_string()) fail("name must be a string");
      cfg.run.name = document.at("name").get<std::string>();
    }
    if (!document.contains("variant")) fail("missing required key 'variant'");
    cfg.run.variant = parse_variant_field(document.at("variant"), "variant");
    if (!document.contains("gains")) fail("missing required key 'gains'");
    cfg.run.gains = parse_gains(document.at("gains"), cfg.run.variant, "gains");
  } catch (const Json::exception& e) {
    fail(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

CompareConfig parse_compare(const Json& document) {
  check_keys(document, "config",
             {"graph", "objective", "integrator", "init", "output", "runs"});
  CompareConfig cfg;
  cfg.document = document;
  try {
    cfg.problem = parse_problem(document);
    require_init_seed(cfg.problem);
    if (!document.contains("runs") || !document.at("runs").is_array()) {
      fail("compare config needs a 'runs' array");
    }
    const Json& runs = document.at("runs");
    if (runs.size() < 2) fail("compare config needs at least 2 run blocks");
    std::set<std::string> names;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const std::string path = "runs[" + std::to_string(k) + "]";
      const Json& block = runs[k];
      check_keys(block, path, {"name", "variant", "gains", "preset", "graph", "objective", "integrator"});
      // Blocks may restate the shared problem, but only identically.
      for (const char* shared : {"graph", "objective", "integrator"}) {
        if (block.contains(shared) && (!document.contains(shared) || block.at(shared) != document.at(shared))) {
          fail(path + "." + shared + " differs from the shared " + shared +
               " block; all runs must share one graph/objective/integrator");
        }
      }
      RunSpec run;
      run.name = "run" + std::to_string(k + 1);
      if (block.contains("name")) {
        if (!block.at("name").is_string()) fail(path + ".name must be a string");
        run.name = block.at("name").get<std::string>();
      }
      if (!names.insert(run.name).second) fail(path + ".name '" + run.name + "' is not unique");
      if (!block.contains("variant")) fail("missing required key '" + path + ".variant'");
      run.variant = parse_variant_field(block.at("variant"), path + ".variant");
      if (!block.contains("gains")) fail("missing required key '" + path + ".gains'");
      run.gains = parse_gains(block.at("gains"), run.variant, path + ".gains");
      if (block.contains("preset")) {
        if (block.at("preset") != "remark4") fail(path + ".preset must be 'remark4'");
        run.gains = preset_remark4(run.gains);
      }
      cfg.runs.push_back(std::move(run));
    }
  } catch (const Json::exception& e) {
    fail(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Graph build_graph(const Json& spec) {
  validate_graph_spec(spec);
  const int n = spec.at("n").get<int>();
  if (spec.at("type") == "ring") return Graph::ring(n);

  std::vector<Edge> edges;
  const Json& list = spec.at("edges");
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string path = "graph.edges[" + std::to_string(k) + "]";
    const Json& e = list[k];
    if (!e.is_array() || e.size() < 2 || e.size() > 3) fail(path + " must be [i, j] or [i, j, w]");
    const int i = get_int(e[0], path + "[0]");
    const int j = get_int(e[1], path + "[1]");
    const double w = e.size() == 3 ? get_number(e[2], path + "[2]") : 1.0;
    // 1-based in the file.
    edges.push_back({i - 1, j - 1, w});
  }
  return Graph::from_edges(n, edges);
}

ObjectiveSet build_objectives(const Json& spec) {
  validate_objective_spec(spec);
  const auto& type = spec.at("type");
  if (type == "random_quadratic") {
    return random_quadratic_set(spec.at("N").get<int>(), spec.at("n").get<int>(),
                                spec.at("seed").get<std::uint64_t>());
  }
  if (type == "example1_trig") {
    const int n = spec.contains("n") ? spec.at("n").get<int>() : 10;
    return example1_trig_set(random_quadratic_set(4, n, spec.at("seed").get<std::uint64_t>()));
  }
  const Json& Qs = spec.at("Q");
  const Json& qs = spec.at("q");
  if (Qs.size() != qs.size() || Qs.empty()) {
    fail("objective.Q and objective.q must list the same positive number of agents");
  }
  std::vector<LocalObjective> locals;
  for (std::size_t i = 0; i < Qs.size(); ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    locals.push_back(LocalObjective::quadratic(get_matrix(Qs[i], "objective.Q" + idx),
                                               get_vector(qs[i], "objective.q" + idx)));
  }
  return ObjectiveSet(std::move(locals));
}

Problem build_problem(const ProblemSpec& spec) {
  Graph graph = build_graph(spec.graph);
  auto objectives = std::make_shared<const ObjectiveSet>(build_objectives(spec.objective));
  if (objectives->n_agents() != graph.n_agents()) {
    fail("graph has " + std::to_string(graph.n_agents()) + " agents but the objective defines " +
         std::to_string(objectives->n_agents()));
  }
  Problem p;
  p.bundle = std::make_shared<const LaplacianBundle>(laplacian_bundle(graph));
  p.objectives = std::move(objectives);
  p.n_agents = graph.n_agents();
  p.dim = p.objectives->dim();
  return p;
}

SystemState initial_state(const Dynamics& dynamics, const InitSpec& init) {
  Eigen::VectorXd x0;
  if (init.x0) {
    x0 = *init.x0;
  } else {
    if (!init.seed) fail("init.seed is required to draw x0");
    Rng rng = Rng::stream(*init.seed, 1);
    x0 = rng.uniform_vector(static_cast<Eigen::Index>(dynamics.n_agents()) * dynamics.dim(), -1.0, 1.0);
  }
  return dynamics.init_state(x0, init.v0, init.lambda0);
}

std::optional<std::uint64_t> experiment_seed(const ProblemSpec& spec) {
  if (spec.init.seed) return spec.init.seed;
  if (spec.objective.contains("seed")) return spec.objective.at("seed").get<std::uint64_t>();
  return std::nullopt;
}

std::string config_hash(const Json& document) {
  const std::string canonical = document.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pidflow::app
