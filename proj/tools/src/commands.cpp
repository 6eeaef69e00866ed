#include "pidflow/app/commands.hpp"

#include <chrono>
#include <future>
#include <ostream>
#include <utility>

#include <fmt/format.h>

#include "pidflow/errors.hpp"

namespace pidflow::app {

namespace {

namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidGains:
    case ErrorCode::kInvalidTopology:
    case ErrorCode::kInvalidEdge:
    case ErrorCode::kNotConnected:
    case ErrorCode::kShape:
    case ErrorCode::kInvalidObjective:
    case ErrorCode::kInvalidBenchmark:
    case ErrorCode::kInvalidInit:
      return kExitConfigError;
    case ErrorCode::kDivergence:
      return kExitDivergence;
    default:
      return kExitRuntimeFailure;
  }
}

Json gains_json(const Gains& g) {
  return Json{{"c1", g.c1}, {"c2", g.c2}, {"c3", g.c3}, {"c4", g.c4}, {"c5", g.c5}};
}

Json condition_json(const ConditionReport& r) {
  return Json{{"variant", std::string(to_string(r.variant))},
              {"sigma", r.sigma},
              {"sigma1", r.sigma1},
              {"eta", r.eta},
              {"gamma", r.gamma_const},
              {"satisfied", r.satisfied},
              {"predicted_rate", r.predicted_rate},
              {"sigma_below_sigma1_minus_1", r.sigma_below_sigma1_minus_one},
              {"l_global", r.l_global},
              {"lambda_max_LtL", r.lambda_max_LtL}};
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

fs::path output_dir(const OutputSpec& spec, const CliOptions& options) {
  return options.out_dir ? *options.out_dir : spec.directory;
}

std::optional<std::string> truncation_note(const RunOutcome& o) {
  if (!o.result.divergence) return std::nullopt;
  return "divergence: " + o.result.divergence->message;
}

void write_run_artifacts(const RunOutcome& o, const Provenance& prov, const Json& config,
                         const OutputSpec& spec, const CliOptions& options, const fs::path& dir) {
  const std::string& name = o.spec.name;
  if (spec.emit_csv && !o.error) {
    write_text(dir / (name + "_trajectory.csv"),
               trajectory_csv(o.result.trajectory, prov, truncation_note(o)));
    write_text(dir / (name + "_metrics.csv"), metrics_csv(o.metrics, prov, truncation_note(o)));
  }
  write_text(dir / (name + "_summary.json"), summary_json(o, prov, config).dump(2) + "\n");
  if (spec.emit_svg && !options.no_svg && !o.error) {
    write_text(dir / (name + "_relative_error.svg"),
               log_plot_svg({{name, o.metrics.times, o.metrics.relative_error}},
                            name + ": relative error", "relative error", prov));
  }
}

void report_outcome(const RunOutcome& o, const CliOptions& options, std::ostream& out,
                    std::ostream& err) {
  if (o.stability_warning) err << "warning: " << o.spec.name << ": " << *o.stability_warning << '\n';
  if (o.error) {
    err << "error: " << o.spec.name << ": " << *o.error << '\n';
    return;
  }
  if (o.diverged()) err << "error: " << o.spec.name << ": " << o.result.divergence->message << '\n';
  if (options.quiet || o.metrics.relative_error.empty()) return;
  out << fmt::format("{}: final relative error {:.6e}", o.spec.name, o.metrics.relative_error.back());
  if (o.fit) out << fmt::format(", rate {:.6g} (r^2 {:.6f})", o.fit->rate, o.fit->r_squared);
  out << fmt::format(", {:.2f} s\n", o.wall_seconds);
}

int outcome_exit_code(const RunOutcome& o) {
  if (o.diverged()) return kExitDivergence;
  if (o.error) return kExitRuntimeFailure;
  return kExitOk;
}

Json base_example1(const char* name, const char* objective_type) {
  Json objective = std::string(objective_type) == "example1_trig"
                       ? Json{{"type", "example1_trig"}, {"seed", 1}, {"n", 10}}
                       : Json{{"type", "random_quadratic"}, {"N", 4}, {"n", 10}, {"seed", 1}};
  return Json{{"name", name},
              {"graph", {{"type", "ring"}, {"n", 4}}},
              {"objective", objective},
              {"variant", "first_order_pid"},
              {"gains", {{"c1", 0.8}, {"c2", 2.9}, {"c3", 5.0}, {"c4", 5.0}}},
              {"integrator", {{"h", 1e-3}, {"t_end", 20.0}, {"record_stride", 10}}},
              {"init", {{"seed", 1}}},
              {"output", {{"directory", "pidflow_out"}, {"emit_csv", true}, {"emit_svg", true}}}};
}

}  // namespace

std::optional<double> first_time_below(const std::vector<double>& times,
                                       const std::vector<double>& values, double threshold) {
  for (std::size_t k = 0; k < times.size() && k < values.size(); ++k) {
    if (values[k] <= threshold) return times[k];
  }
  return std::nullopt;
}

RunOutcome execute_run(const Problem& problem, const ProblemSpec& spec, const RunSpec& run) {
  RunOutcome o;
  o.spec = run;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dynamics dynamics(run.variant, run.gains, problem.bundle, problem.objectives);
    o.stability_warning = stability_warning(dynamics.gains(), problem.objectives->l_global(),
                                            problem.bundle->lambda_max_L, spec.integrator.h);
    const SystemState initial = initial_state(dynamics, spec.init);
    o.result = integrate_until_divergence(dynamics, initial, spec.integrator, experiment_seed(spec));
    o.metrics = metrics(o.result.trajectory, *problem.objectives, *problem.bundle);
    try {
      o.fit = fit_rate(o.metrics.times, o.metrics.relative_error);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientData) throw;
    }
    if (run.variant != Variant::kFirstOrderPid) {
      o.condition = check_condition(run.variant, dynamics.gains(), problem.objectives->l_global(),
                                    *problem.bundle);
    }
    o.time_to_threshold = first_time_below(o.metrics.times, o.metrics.relative_error, kReportThreshold);
  } catch (const Error& e) {
    if (exit_code_for(e) == kExitConfigError) throw;
    o.error = e.what();
  }
  o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return o;
}

Json summary_json(const RunOutcome& o, const Provenance& prov, const Json& config) {
  Json j;
  j["name"] = o.spec.name;
  j["variant"] = std::string(to_string(o.spec.variant));
  j["gains"] = gains_json(o.result.trajectory.metadata.variant ? o.result.trajectory.metadata.gains
                                                               : o.spec.gains);
  if (o.spec.variant == Variant::kZhu2022) {
    // The integral state of the original formulation is c2^2 c1 lambda.
    j["lambda_tilde_scale"] = o.spec.gains.c2 * o.spec.gains.c2 * o.spec.gains.c1;
  }
  j["seed"] = prov.seed ? Json(*prov.seed) : Json(nullptr);
  j["config_hash"] = prov.config_hash;
  j["status"] = o.error ? "error" : (o.diverged() ? "diverged" : "ok");
  if (o.error) j["error"] = *o.error;
  if (o.diverged()) {
    const auto& d = *o.result.divergence;
    j["divergence"] = {{"time", d.time}, {"component", d.component}, {"message", d.message}};
  }
  if (!o.metrics.relative_error.empty()) {
    j["final_time"] = o.metrics.times.back();
    j["final_relative_error"] = o.metrics.relative_error.back();
    j["relative_error_is_absolute"] = o.metrics.absolute_error;
    j["final_consensus_error"] = o.metrics.consensus_error.back();
    j["final_optimality_residual"] = o.metrics.optimality_residual.back();
    double drift = 0.0;
    for (double d : o.metrics.lambda_sum_drift) drift = std::max(drift, d);
    j["max_lambda_sum_drift"] = drift;
    j["z_star"] = std::vector<double>(o.metrics.z_star.data(),
                                      o.metrics.z_star.data() + o.metrics.z_star.size());
  }
  j["rate_fit"] = o.fit ? Json{{"rate", o.fit->rate}, {"r_squared", o.fit->r_squared},
                               {"points", o.fit->points}}
                        : Json(nullptr);
  j["time_to_relative_error_1e-4"] = optional_number(o.time_to_threshold);
  j["condition"] = o.condition ? condition_json(*o.condition) : Json(nullptr);
  j["stability_warning"] = o.stability_warning ? Json(*o.stability_warning) : Json(nullptr);
  j["config"] = config;
  return j;
}

int run_document(const Json& document, const CliOptions& options, std::ostream& out,
                 std::ostream& err, RunOutcome* outcome) {
  try {
    const ExperimentConfig cfg = parse_experiment(document);
    const Problem problem = build_problem(cfg.problem);
    RunOutcome o = execute_run(problem, cfg.problem, cfg.run);
    const Provenance prov{config_hash(document), experiment_seed(cfg.problem), cfg.run.name};
    write_run_artifacts(o, prov, document, cfg.problem.output, options,
                        output_dir(cfg.problem.output, options));
    report_outcome(o, options, out, err);
    const int code = outcome_exit_code(o);
    if (outcome) *outcome = std::move(o);
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int compare_document(const Json& document, const CliOptions& options, std::ostream& out,
                     std::ostream& err, const std::string& prefix,
                     std::vector<RunOutcome>* outcomes) {
  try {
    const CompareConfig cfg = parse_compare(document);
    const Problem problem = build_problem(cfg.problem);

    std::vector<std::future<RunOutcome>> futures;
    futures.reserve(cfg.runs.size());
    for (const RunSpec& run : cfg.runs) {
      futures.push_back(std::async(std::launch::async, [&problem, &cfg, run] {
        try {
          return execute_run(problem, cfg.problem, run);
        } catch (const Error& e) {
          RunOutcome failed;
          failed.spec = run;
          failed.error = e.what();
          return failed;
        }
      }));
    }
    std::vector<RunOutcome> results;
    results.reserve(futures.size());
    for (auto& f : futures) results.push_back(f.get());

    // Single writer after all blocks finished.
    const fs::path dir = output_dir(cfg.problem.output, options);
    const std::string hash = config_hash(document);
    const auto seed = experiment_seed(cfg.problem);
    std::vector<NamedSeries> curves;
    int code = kExitOk;
    for (const RunOutcome& o : results) {
      write_run_artifacts(o, {hash, seed, o.spec.name}, document, cfg.problem.output, options, dir);
      report_outcome(o, options, out, err);
      if (!o.error) curves.push_back({o.spec.name, o.metrics.times, o.metrics.relative_error});
      const int c = outcome_exit_code(o);
      if (c == kExitDivergence || (c != kExitOk && code == kExitOk)) code = c;
    }
    const Provenance prov{hash, seed, prefix};
    if (cfg.problem.output.emit_csv) write_text(dir / (prefix + ".csv"), comparison_csv(curves, prov));
    if (cfg.problem.output.emit_svg && !options.no_svg) {
      write_text(dir / (prefix + ".svg"),
                 log_plot_svg(curves, "relative error comparison", "relative error", prov));
    }
    if (outcomes) *outcomes = std::move(results);
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int check_document(const Json& document, const CliOptions& options, std::ostream& out,
                   std::ostream& err) {
  try {
    const ExperimentConfig cfg = parse_experiment(document, /*for_simulation=*/false);
    if (cfg.run.variant == Variant::kFirstOrderPid) {
      err << "error: condition applies to second-order variants\n";
      return kExitConfigError;
    }
    const Problem problem = build_problem(cfg.problem);
    Gains gains = cfg.run.gains;
    if (cfg.run.variant == Variant::kZhu2022) gains.c5 = 0.0;
    const ConditionReport report =
        check_condition(cfg.run.variant, gains, problem.objectives->l_global(), *problem.bundle);
    if (options.json) {
      out << condition_json(report).dump(2) << '\n';
    } else {
      out << to_key_value(report);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_run(const fs::path& config_path, const CliOptions& options, std::ostream& out,
            std::ostream& err) {
  try {
    return run_document(load_json_file(config_path), options, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_compare(const fs::path& config_path, const CliOptions& options, std::ostream& out,
                std::ostream& err) {
  try {
    return compare_document(load_json_file(config_path), options, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_check(const fs::path& config_path, const CliOptions& options, std::ostream& out,
              std::ostream& err) {
  try {
    return check_document(load_json_file(config_path), options, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

Json builtin_config(std::string_view example) {
  if (example == "example1") return base_example1("example1", "random_quadratic");
  if (example == "example1_nonconvex") return base_example1("example1_nonconvex", "example1_trig");
  if (example == "example2") {
    const Json gains = {{"c1", 0.14}, {"c2", 0.65}, {"c3", 0.156}, {"c4", 0.52}, {"c5", 0.52}};
    return Json{
        {"graph", {{"type", "ring"}, {"n", 20}}},
        {"objective", {{"type", "random_quadratic"}, {"N", 20}, {"n", 7}, {"seed", 2}}},
        {"integrator", {{"h", 1e-3}, {"t_end", 60.0}, {"record_stride", 10}}},
        {"init", {{"seed", 2}}},
        {"output", {{"directory", "pidflow_out"}, {"emit_csv", true}, {"emit_svg", true}}},
        {"runs",
         {{{"name", "example2_second_order_pid"}, {"variant", "second_order_pid"}, {"gains", gains}},
          {{"name", "example2_zhu2022"}, {"variant", "zhu2022"}, {"gains", gains}}}}};
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown example '" + std::string(example) +
                                             "' (expected example1, example1_nonconvex or example2)");
}

int cmd_reproduce(std::string_view example, const CliOptions& options, std::ostream& out,
                  std::ostream& err) {
  Json document;
  try {
    document = builtin_config(example);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  CliOptions opts = options;
  if (!opts.out_dir) opts.out_dir = fs::path("pidflow_out");
  const fs::path dir = *opts.out_dir;
  const std::string name(example);
  try {
    write_text(dir / (name + "_config.json"), document.dump(2) + "\n");

    if (example == "example2") {
      std::vector<RunOutcome> outcomes;
      const int code = compare_document(document, opts, out, err, "example2", &outcomes);
      if (outcomes.size() == 2) {
        const auto& pid = outcomes[0];
        const auto& base = outcomes[1];
        const bool earlier = pid.time_to_threshold &&
                             (!base.time_to_threshold || *pid.time_to_threshold < *base.time_to_threshold);
        Json cmp{{"threshold", kReportThreshold},
                 {"second_order_pid_time", optional_number(pid.time_to_threshold)},
                 {"zhu2022_time", optional_number(base.time_to_threshold)},
                 {"second_order_pid_reaches_first", earlier},
                 {"config_hash", config_hash(document)},
                 {"seed", 2}};
        write_text(dir / "example2_comparison.json", cmp.dump(2) + "\n");
        if (!opts.quiet) {
          out << fmt::format("time to relative error 1e-4: second_order_pid {}, zhu2022 {}\n",
                             pid.time_to_threshold ? format_double(*pid.time_to_threshold) : "not reached",
                             base.time_to_threshold ? format_double(*base.time_to_threshold) : "not reached");
        }
      }
      return code;
    }

    RunOutcome primary;
    const int code = run_document(document, opts, out, err, &primary);
    if (code != kExitOk && code != kExitDivergence) return code;

    const Provenance prov{config_hash(document), 1, name};
    std::vector<NamedSeries> curves{{name, primary.metrics.times, primary.metrics.relative_error}};
    if (example == "example1_nonconvex") {
      // Overlay the convex base problem and compare minimizers.
      CliOptions silent = opts;
      silent.quiet = true;
      RunOutcome convex;
      const int base_code =
          run_document(base_example1("example1_convex_base", "random_quadratic"), silent, out, err, &convex);
      if (base_code != kExitOk) return base_code;
      curves.push_back({"example1_convex_base", convex.metrics.times, convex.metrics.relative_error});

      const Eigen::VectorXd& z_trig = primary.metrics.z_star;
      const Eigen::VectorXd& z_base = convex.metrics.z_star;
      const auto& final_state = primary.result.trajectory.states.back();
      const StateLayout& layout = primary.result.trajectory.layout;
      double distance = 0.0;
      for (int i = 0; i < layout.n_agents; ++i) {
        const auto xi = final_state.segment(static_cast<Eigen::Index>(i) * layout.dim, layout.dim);
        distance = std::max(distance, (xi - z_base).lpNorm<Eigen::Infinity>());
      }
      Json cmp{{"central_minimizer_gap_inf", (z_trig - z_base).lpNorm<Eigen::Infinity>()},
               {"final_distance_to_base_z_star_inf", distance},
               {"config_hash", prov.config_hash},
               {"seed", 1}};
      write_text(dir / "example1_nonconvex_comparison.json", cmp.dump(2) + "\n");
    }
    if (!opts.no_svg) {
      write_text(dir / (name + "_comparison.svg"),
                 log_plot_svg(curves, name + ": relative error", "relative error", prov));
    }
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace pidflow::app
