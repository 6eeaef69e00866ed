#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pidflow/app/commands.hpp"
#include "support.hpp"

using namespace pidflow;
using namespace pidflow::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pidflow_test_app" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json ring3_config() {
  return Json::parse(R"({
    "name": "ring3",
    "graph": {"type": "ring", "n": 3},
    "objective": {"type": "random_quadratic", "N": 3, "n": 2, "seed": 5},
    "variant": "second_order_pid",
    "gains": {"c1": 1.0, "c2": 1.0, "c3": 0.5, "c4": 1.0, "c5": 1.0},
    "integrator": {"h": 0.01, "t_end": 2.0, "record_stride": 10},
    "init": {"seed": 3},
    "output": {"emit_csv": true, "emit_svg": false}
  })");
}

Json compare_config() {
  return Json::parse(R"({
    "graph": {"type": "ring", "n": 5},
    "objective": {"type": "quadratic_list",
                  "Q": [[[1, 0, 0], [0, 2, 0], [0, 0, 1]], [[2, 1, 0], [1, 2, 0], [0, 0, 1]],
                        [[1, 0, 0], [0, 1, 0], [0, 0, 3]], [[3, 0, 1], [0, 1, 0], [1, 0, 2]],
                        [[1, 0, 0], [0, 1, 0], [0, 0, 1]]],
                  "q": [[1, -2, 0.5], [0, 3, -1], [-4, 1, 2], [2, 2, 2], [-1, 0, 1]]},
    "integrator": {"h": 0.005, "t_end": 40.0, "record_stride": 20},
    "init": {"seed": 4},
    "output": {"emit_csv": true, "emit_svg": true},
    "runs": [
      {"name": "pid", "variant": "second_order_pid",
       "gains": {"c1": 1.0, "c2": 2.0, "c3": 0.5, "c4": 1.0, "c5": 1.5}},
      {"name": "remark4", "variant": "second_order_pid", "preset": "remark4",
       "gains": {"c1": 1.0, "c2": 2.0, "c3": 0.5, "c4": 1.0, "c5": 1.5}}
    ]
  })");
}

struct Streams {
  std::ostringstream out, err;
};

}  // namespace

TEST_CASE("minimal ring(3) run writes three files") {
  const fs::path dir = scratch("ring3");
  CliOptions opts;
  opts.out_dir = dir;
  opts.quiet = true;
  Streams s;
  REQUIRE(run_document(ring3_config(), opts, s.out, s.err) == kExitOk);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 3);
  CHECK(fs::exists(dir / "ring3_metrics.csv"));
  CHECK(fs::exists(dir / "ring3_trajectory.csv"));
  CHECK(fs::exists(dir / "ring3_summary.json"));

  const std::string hash = config_hash(ring3_config());
  for (const char* f : {"ring3_metrics.csv", "ring3_trajectory.csv", "ring3_summary.json"}) {
    const std::string text = slurp(dir / f);
    CHECK(text.find(hash) != std::string::npos);
    CHECK(text.find("seed") != std::string::npos);
  }
  const std::string metrics = slurp(dir / "ring3_metrics.csv");
  CHECK(metrics.find(std::string(kMetricsHeader) + "\n") != std::string::npos);
}

TEST_CASE("metrics CSV round-trips at full precision") {
  const fs::path dir = scratch("roundtrip");
  CliOptions opts;
  opts.out_dir = dir;
  opts.quiet = true;
  Streams s;
  RunOutcome outcome;
  REQUIRE(run_document(ring3_config(), opts, s.out, s.err, &outcome) == kExitOk);
  const MetricsSeries back = read_metrics_csv(dir / "ring3_metrics.csv");
  CHECK(back.times == outcome.metrics.times);
  CHECK(back.relative_error == outcome.metrics.relative_error);
  CHECK(back.consensus_error == outcome.metrics.consensus_error);
  CHECK(back.optimality_residual == outcome.metrics.optimality_residual);
  CHECK(back.lambda_sum_drift == outcome.metrics.lambda_sum_drift);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  Streams s;
  CliOptions opts;
  opts.quiet = true;
  opts.out_dir = a;
  run_document(ring3_config(), opts, s.out, s.err);
  opts.out_dir = b;
  run_document(ring3_config(), opts, s.out, s.err);
  for (const char* f : {"ring3_metrics.csv", "ring3_trajectory.csv", "ring3_summary.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("config validation exits with 2") {
  Streams s;
  CliOptions opts;
  opts.out_dir = scratch("invalid");

  Json negative = ring3_config();
  negative["gains"]["c1"] = -1.0;
  CHECK(run_document(negative, opts, s.out, s.err) == kExitConfigError);
  CHECK(s.err.str().find("gains.c1") != std::string::npos);

  Json unknown = ring3_config();
  unknown["colour"] = "blue";
  CHECK(run_document(unknown, opts, s.out, s.err) == kExitConfigError);

  Json mismatch = ring3_config();
  mismatch["objective"]["N"] = 4;
  CHECK(run_document(mismatch, opts, s.out, s.err) == kExitConfigError);

  Json no_seed = ring3_config();
  no_seed.erase("init");
  CHECK(run_document(no_seed, opts, s.out, s.err) == kExitConfigError);

  Json disconnected = ring3_config();
  disconnected["graph"] = Json::parse(R"({"type": "edges", "n": 3, "edges": [[1, 2]]})");
  CHECK(run_document(disconnected, opts, s.out, s.err) == kExitConfigError);
}

TEST_CASE("divergence exits with 3 and keeps a truncated CSV") {
  const fs::path dir = scratch("diverge");
  Json cfg = ring3_config();
  cfg["integrator"] = Json::parse(R"({"h": 3.0, "t_end": 3000.0, "record_stride": 1})");
  Streams s;
  CliOptions opts;
  opts.out_dir = dir;
  CHECK(run_document(cfg, opts, s.out, s.err) == kExitDivergence);
  const std::string metrics = slurp(dir / "ring3_metrics.csv");
  CHECK(metrics.find("# truncated") != std::string::npos);
  CHECK(s.err.str().find("warning") != std::string::npos);
}

TEST_CASE("compare") {
  SUBCASE("remark4 preset against the base gains") {
    const fs::path dir = scratch("compare");
    Streams s;
    CliOptions opts;
    opts.out_dir = dir;
    opts.quiet = true;
    std::vector<RunOutcome> outcomes;
    REQUIRE(compare_document(compare_config(), opts, s.out, s.err, "comparison", &outcomes) == kExitOk);
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[1].spec.gains.c4 == 1.0);
    CHECK(outcomes[1].spec.gains.c3 == 2.0);
    for (const RunOutcome& o : outcomes) CHECK(o.metrics.relative_error.back() < 1e-3);
    CHECK(outcomes[0].metrics.relative_error != outcomes[1].metrics.relative_error);
    CHECK(fs::exists(dir / "comparison.csv"));
    CHECK(fs::exists(dir / "comparison.svg"));
    CHECK(fs::exists(dir / "pid_metrics.csv"));
    CHECK(fs::exists(dir / "remark4_metrics.csv"));
  }

  SUBCASE("identical blocks give identical curves") {
    Json cfg = compare_config();
    cfg["runs"][1] = cfg["runs"][0];
    cfg["runs"][1]["name"] = "pid_again";
    Streams s;
    CliOptions opts;
    opts.out_dir = scratch("compare_same");
    opts.no_svg = true;
    std::vector<RunOutcome> outcomes;
    REQUIRE(compare_document(cfg, opts, s.out, s.err, "comparison", &outcomes) == kExitOk);
    CHECK(outcomes[0].metrics.relative_error == outcomes[1].metrics.relative_error);
    CHECK_FALSE(fs::exists(*opts.out_dir / "comparison.svg"));
  }

  SUBCASE("mismatched graph blocks") {
    Json cfg = compare_config();
    cfg["runs"][1]["graph"] = Json::parse(R"({"type": "ring", "n": 6})");
    Streams s;
    CliOptions opts;
    opts.out_dir = scratch("compare_bad");
    CHECK(compare_document(cfg, opts, s.out, s.err) == kExitConfigError);
  }

  SUBCASE("a diverging block does not stop the others") {
    Json cfg = compare_config();
    cfg["runs"][1].erase("preset");
    cfg["runs"][1]["gains"]["c1"] = 1e9;
    Streams s;
    CliOptions opts;
    opts.out_dir = scratch("compare_partial");
    opts.quiet = true;
    std::vector<RunOutcome> outcomes;
    CHECK(compare_document(cfg, opts, s.out, s.err, "comparison", &outcomes) == kExitDivergence);
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[0].ok());
    CHECK(outcomes[1].diverged());
    CHECK(fs::exists(*opts.out_dir / "pid_metrics.csv"));
  }
}

TEST_CASE("check") {
  SUBCASE("single agent collapses to sqrt(c1 l)") {
    Json cfg = Json::parse(R"({
      "graph": {"type": "edges", "n": 1, "edges": []},
      "objective": {"type": "quadratic_list", "Q": [[[2.0, 0.0], [0.0, 3.0]]], "q": [[1.0, -1.0]]},
      "variant": "corollary",
      "gains": {"c1": 0.5, "c2": 1.0, "c3": 1e-300, "c4": 1.0, "c5": 0.0}
    })");
    Streams s;
    CliOptions opts;
    opts.json = true;
    REQUIRE(check_document(cfg, opts, s.out, s.err) == kExitOk);
    const Json report = Json::parse(s.out.str());
    CHECK(report["sigma"].get<double>() == doctest::Approx(std::sqrt(0.5 * 3.0)));
    CHECK(report["eta"].get<double>() == doctest::Approx(1.0));
  }

  SUBCASE("Example-2 config prints both sigmas") {
    Json cfg = builtin_config("example2");
    Json run = cfg["runs"][0];
    cfg.erase("runs");
    cfg["variant"] = run["variant"];
    cfg["gains"] = run["gains"];
    Streams s;
    REQUIRE(check_document(cfg, {}, s.out, s.err) == kExitOk);
    for (const char* key : {"sigma = ", "sigma1 = ", "eta = ", "gamma = ", "satisfied = "}) {
      CHECK(s.out.str().find(key) != std::string::npos);
    }
  }

  SUBCASE("first-order and missing gains are config errors") {
    Streams s;
    CHECK(check_document(builtin_config("example1"), {}, s.out, s.err) == kExitConfigError);
    Json cfg = ring3_config();
    cfg.erase("gains");
    CHECK(check_document(cfg, {}, s.out, s.err) == kExitConfigError);
  }
}

TEST_CASE("builtin configs") {
  const Json e1 = builtin_config("example1");
  CHECK(e1["gains"]["c1"] == 0.8);
  CHECK(e1["gains"]["c2"] == 2.9);
  CHECK(e1["graph"]["n"] == 4);
  const Json e2 = builtin_config("example2");
  CHECK(e2["runs"].size() == 2);
  CHECK(e2["runs"][0]["gains"]["c3"] == 0.156);
  CHECK(e2["objective"]["n"] == 7);
  CHECK_THROWS_AS(builtin_config("example3"), Error);
}

TEST_CASE("first_time_below") {
  const std::vector<double> t{0, 1, 2, 3}, v{1, 0.1, 1e-5, 1e-6};
  CHECK(first_time_below(t, v, 1e-4) == 2.0);
  CHECK_FALSE(first_time_below(t, v, 1e-9).has_value());
}
