#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sys/wait.h>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "efq/errors.hpp"
#include "efq/experiment.hpp"
#include "efq/text_format.hpp"

using namespace efq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("efq_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CommandContext context(const fs::path& out, ExperimentConfig config = default_config()) {
  CommandContext ctx;
  ctx.config = std::move(config);
  ctx.out_dir = out;
  ctx.quiet = true;
  return ctx;
}

std::vector<std::string> issues_of(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const ValidationError& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& path) {
  for (const auto& s : issues) {
    if (s.rfind(path + ":", 0) == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("double formatting round-trips exactly") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t raw = bits(rng);
    double v;
    std::memcpy(&v, &raw, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "-0");
  CHECK(std::isinf(parse_double(format_double(INFINITY))));
  CHECK(std::isnan(parse_double(format_double(NAN))));
  CHECK_THROWS_AS(parse_double("1.5x"), ParameterError);
}

TEST_CASE("csv round trip") {
  CsvTable t{"abc", {"a", "b"}, {{1.0, 1.0 / 3.0}, {-2.5e-300, 6.02214076e23}}};
  const CsvTable back = parse_csv(to_csv(t));
  CHECK(back.config_hash == "abc");
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ParameterError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("config round trip and hash") {
  const ExperimentConfig c = default_config();
  const json doc = config_to_json(c);
  const ExperimentConfig back = config_from_json(doc);
  CHECK(config_to_json(back) == doc);
  CHECK(config_hash(back) == config_hash(c));

  ExperimentConfig other = c;
  other.sim.seed = 2;
  CHECK(config_hash(other) != config_hash(c));

  // Missing sections fall back to defaults.
  const ExperimentConfig minimal =
      config_from_json(json{{"schema", kConfigSchema}, {"version", kConfigVersion}});
  CHECK(config_hash(minimal) == config_hash(c));
}

TEST_CASE("config validation reports field paths") {
  json doc = config_to_json(default_config());
  doc["version"] = 99;
  doc["plant"]["den"] = {1.0, -1.0};
  doc["bits"] = {1, 0};
  doc["design"]["nu"] = 0.9;
  doc["fit"]["method"] = "lmi";
  doc["sim"]["input"] = "pink";
  doc["sim"]["typo"] = 1;
  auto issues = issues_of(doc);
  CHECK(mentions(issues, "version"));
  CHECK(mentions(issues, "fit.method"));
  CHECK(mentions(issues, "sim.input"));
  CHECK(mentions(issues, "sim.typo"));

  doc = config_to_json(default_config());
  doc["plant"]["den"] = {1.0, -1.0};
  doc["bits"] = {1, 0};
  doc["design"]["nu"] = 0.9;
  doc["grid_points"] = 10;
  issues = issues_of(doc);
  CHECK(mentions(issues, "plant"));
  CHECK(mentions(issues, "bits[1]"));
  CHECK(mentions(issues, "design.nu"));
  CHECK(mentions(issues, "grid_points"));

  doc = config_to_json(default_config());
  doc["plant"]["num"][1] = "x";
  CHECK(mentions(issues_of(doc), "plant.num[1]"));
}

TEST_CASE("filter json round-trips binary64 exactly") {
  const RationalDiscreteTF f({1.0, 0.1, -1.0 / 3.0, 2.0e-17}, {1.0, -0.7071067811865476, 1e-300});
  const json doc = json::parse(filter_to_json(f).dump());
  const RationalDiscreteTF back = filter_from_json(doc);
  CHECK(back == f);
  CHECK_THROWS_AS(filter_from_json(json{{"den", {1.0}}}), ValidationError);
  CHECK_THROWS_AS(filter_from_json(json{{"num", {1.0}}, {"den", {"a"}}}), ValidationError);
}

TEST_CASE("design command") {
  const fs::path out = scratch("design");
  const json doc = cmd_design(context(out));
  CHECK(doc["config_hash"] == config_hash(default_config()));
  CHECK(std::abs(doc["r_opt_log_mean"].get<double>()) < 1e-8);
  CHECK(doc["feasibility_margin"].get<double>() > 0.0);
  CHECK(fs::exists(out / "r_opt.csv"));
  const CsvTable r = parse_csv(read_text_file(out / "r_opt.csv"));
  CHECK(r.config_hash == config_hash(default_config()));
  CHECK(r.rows.size() == default_config().grid_points);

  const std::string first = read_text_file(out / "design.json");
  const std::string first_csv = read_text_file(out / "r_opt.csv");
  cmd_design(context(out));
  CHECK(read_text_file(out / "design.json") == first);
  CHECK(read_text_file(out / "r_opt.csv") == first_csv);
}

TEST_CASE("design command on a constant plant") {
  ExperimentConfig c = default_config();
  c.plant.num = {2.0};
  c.plant.den = {1.0};
  c.design.nu = 3.0;
  const json doc = cmd_design(context(scratch("constant"), c));
  CHECK(doc["distortion"].get<double>() == doctest::Approx(4.0 / 2.0).epsilon(1e-12));
  CHECK(doc["constant_plant"].get<bool>());
}

TEST_CASE("rd-curve command") {
  const fs::path out = scratch("rd");
  ExperimentConfig c = default_config();
  c.grid_points = 2048;
  const auto rows = cmd_rd_curve(context(out, c));
  const CsvTable t = parse_csv(read_text_file(out / "rd_curve.csv"));
  CHECK(t.columns == std::vector<std::string>{"bits", "lambda", "gamma", "D_db", "D_uniform_db",
                                              "bound_db", "theorem3_residual"});
  REQUIRE(t.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(t.rows[i][0] == rows[i].bits);
    CHECK(t.rows[i][3] == to_db(rows[i].distortion));
    CHECK(t.rows[i][6] < 1e-6);
  }
  // Strictly decreasing down each lambda column.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[i].lambda == rows[j].lambda && rows[i].bits < rows[j].bits) {
        CHECK(rows[j].distortion < rows[i].distortion);
      }
    }
  }
  const json doc = json::parse(read_text_file(out / "rd_curve.json"));
  CHECK(doc["rows"].size() == rows.size());
}

TEST_CASE("fit command and filter round trip") {
  const fs::path out = scratch("fit");
  ExperimentConfig c = default_config();
  CommandContext ctx = context(out, c);
  CHECK_THROWS_AS(cmd_fit(ctx), ValidationError);  // no design yet

  cmd_design(ctx);
  const FitReport report = cmd_fit(ctx);
  CHECK(report.feasible);
  CHECK(report.loss_db() < 0.5);

  const json filter = json::parse(read_text_file(out / "filter.json"));
  const RationalDiscreteTF loaded = filter_from_json(filter);
  CHECK(loaded == report.fitted);
  CHECK(loaded.num().front() == 1.0);

  const CellProblem cell = cell_problem(c, c.design.bits, c.design.lambda);
  const FitReport again = evaluate_fit(loaded, cell.p, cell.gamma, report.ideal_mse, "qcqp");
  CHECK(again.achieved_mse == report.achieved_mse);
  CHECK(again.norm_sq == report.norm_sq);

  ExperimentConfig yw = c;
  yw.fit.method = FitMethod::yule_walker;
  CommandContext yctx = context(out, yw);
  CHECK_THROWS_AS(cmd_fit(yctx), ValidationError);  // design hash differs
  cmd_design(yctx);
  const FitReport yrep = cmd_fit(yctx);
  CHECK(yrep.method == "yw");
  CHECK(yrep.fitted.is_stable());
}

TEST_CASE("simulate command") {
  const fs::path out = scratch("simulate");
  ExperimentConfig c = default_config();
  c.sim.length = 20000;
  c.sim.seeds = 3;
  CommandContext ctx = context(out, c);
  ctx.write_trace = true;
  cmd_design(ctx);
  cmd_fit(ctx);
  const json summary = cmd_simulate(ctx);
  CHECK(summary["seeds"] == 3);
  CHECK(summary["max_loop_identity_error"].get<double>() <= 1e-10);
  for (int seed = 1; seed <= 3; ++seed) {
    CHECK(fs::exists(out / ("simulate_seed_" + std::to_string(seed) + ".json")));
  }
  const CsvTable trace = parse_csv(read_text_file(out / "trace_seed_1.csv"));
  CHECK(trace.columns == std::vector<std::string>{"k", "x", "u", "v", "w", "overload"});
  CHECK(trace.rows.size() == 20000);

  const std::string first = read_text_file(out / "simulate_summary.json");
  ctx.workers = 3;
  cmd_simulate(ctx);
  CHECK(read_text_file(out / "simulate_summary.json") == first);
}

TEST_CASE("verify command") {
  const fs::path out = scratch("verify");
  ExperimentConfig c = default_config();
  const auto checks = cmd_verify(context(out, c));
  for (const auto& check : checks) {
    INFO(check.name << " measured " << check.measured << " detail " << check.detail);
    CHECK(check.passed);
  }
  bool saw_grid = false;
  for (const auto& check : checks) saw_grid = saw_grid || check.name == "grid_convergence";
  CHECK(saw_grid);

  // A coarse grid still reports a measured alpha delta.
  c.grid_points = 64;
  for (const auto& check : cmd_verify(context(out, c))) {
    if (check.name == "grid_convergence") CHECK(std::isfinite(check.measured));
  }
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ValidationError({"x"})) == 1);
  CHECK(exit_code_for(DomainError("x")) == 1);
  CHECK(exit_code_for(NumericalError("x")) == 2);
  CHECK(exit_code_for(InvariantError("x")) == 3);
}

#ifdef EFQ_CLI_PATH
TEST_CASE("command-line tool") {
  const fs::path out = scratch("cli");
  const std::string cli = EFQ_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " --out \"" + out.string() + "\" --quiet";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("design --grid 2048") == 0);
  CHECK(fs::exists(out / "design.json"));
  CHECK(run("rd-curve --grid 2048") == 0);
  CHECK(run("fit --grid 2048") == 0);
  CHECK(run("fit") == 1);  // design was made with a different grid

  json bad = config_to_json(default_config());
  bad["design"]["nu"] = 0.5;
  write_text_file(out / "bad.json", bad.dump());
  CHECK(run("design --config \"" + (out / "bad.json").string() + "\"") == 1);
  CHECK(run("verify --config \"" + (out / "bad.json").string() + "\"") == 1);
  CHECK(run("design --config \"" + (out / "missing.json").string() + "\"") == 1);
  CHECK(run("frobnicate") == 1);

  json small = config_to_json(default_config());
  small["sim"]["length"] = 20000;
  small["sim"]["seeds"] = 2;
  write_text_file(out / "small.json", small.dump());
  const std::string cfg = " --config \"" + (out / "small.json").string() + "\"";
  CHECK(run("design" + cfg) == 0);
  CHECK(run("fit" + cfg) == 0);
  CHECK(run("simulate --seed 7" + cfg) == 0);
  CHECK(fs::exists(out / "simulate_seed_8.json"));
  CHECK(run("simulate" + cfg) == 0);
  CHECK(fs::exists(out / "simulate_summary.json"));
  CHECK(run("verify" + cfg) == 0);
}
#endif
