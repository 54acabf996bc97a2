#include "efq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "efq/errors.hpp"
#include "efq/parallel.hpp"
#include "efq/text_format.hpp"

namespace efq {

using nlohmann::json;

namespace {

// Collects config problems with their field paths.
class Reader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& what) { issues.push_back(path + ": " + what); }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& item : j.items()) {
      if (!known.count(item.key())) fail(join(path, item.key()), "unknown field");
    }
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  void number(const json& j, const char* key, const std::string& path, double& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return;
    }
    out = v.get<double>();
  }

  template <class Int>
  void integer(const json& j, const char* key, const std::string& path, Int& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<Int>();
      } else {
        fail(join(path, key), "must be nonnegative");
      }
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const json& j, const char* key, const std::string& path, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) {
      fail(join(path, key), "expected true or false");
      return;
    }
    out = j.at(key).get<bool>();
  }

  template <class T>
  void list(const json& j, const char* key, const std::string& path, std::vector<T>& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    const std::string where = join(path, key);
    if (!v.is_array()) {
      fail(where, "expected an array");
      return;
    }
    std::vector<T> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool ok = std::is_integral_v<T> ? v[i].is_number_integer() : v[i].is_number();
      if (!ok) {
        fail(where + "[" + std::to_string(i) + "]",
             std::is_integral_v<T> ? "expected an integer" : "expected a number");
        return;
      }
      values.push_back(v[i].get<T>());
    }
    out = std::move(values);
  }
};

void validate(const ExperimentConfig& c, Reader& r) {
  try {
    c.plant.to_tf();
  } catch (const Error& e) {
    r.fail("plant", e.what());
  }
  for (std::size_t i = 0; i < c.plant.num.size(); ++i) {
    if (!std::isfinite(c.plant.num[i])) r.fail("plant.num[" + std::to_string(i) + "]", "must be finite");
  }
  if (c.bits_list.empty()) r.fail("bits", "must not be empty");
  for (std::size_t i = 0; i < c.bits_list.size(); ++i) {
    if (c.bits_list[i] < 1 || c.bits_list[i] > 52) {
      r.fail("bits[" + std::to_string(i) + "]", "must lie in [1, 52]");
    }
  }
  if (c.lambda_list.empty()) r.fail("lambdas", "must not be empty");
  for (std::size_t i = 0; i < c.lambda_list.size(); ++i) {
    if (c.lambda_list[i] < 1) r.fail("lambdas[" + std::to_string(i) + "]", "must be at least 1");
  }
  if (!(c.loading_factor > 0.0) || !std::isfinite(c.loading_factor)) {
    r.fail("loading_factor", "must be positive");
  }
  if (c.grid_points < FrequencyGrid::kMinPoints) {
    r.fail("grid_points", "must be at least " + std::to_string(FrequencyGrid::kMinPoints));
  }
  if (c.design.bits < 1 || c.design.bits > 52) r.fail("design.bits", "must lie in [1, 52]");
  if (c.design.lambda < 1) r.fail("design.lambda", "must be at least 1");
  if (c.design.nu && !(*c.design.nu > 1.0 && std::isfinite(*c.design.nu))) {
    r.fail("design.nu", "nu = gamma + 1 must exceed 1, got " + format_double(*c.design.nu));
  }
  if (c.fit.order < 1) r.fail("fit.order", "must be at least 1");
  if (c.fit.order > c.grid_points / 4) r.fail("fit.order", "must not exceed grid_points / 4");
  if (c.sim.length < 2) r.fail("sim.length", "must be at least 2");
  if (c.sim.seeds < 1) r.fail("sim.seeds", "must be at least 1");
  if (!(c.sim.ct_pole > 0.0) || !std::isfinite(c.sim.ct_pole)) {
    r.fail("sim.ct_pole", "must be positive");
  }
  if (c.sim.autocorr_lags < 1 || c.sim.autocorr_lags + 1 >= c.sim.length) {
    r.fail("sim.autocorr_lags", "must lie in [1, sim.length - 2]");
  }
}

std::filesystem::path input_or_default(const std::optional<std::filesystem::path>& given,
                                       const std::filesystem::path& dir, const char* name) {
  return given ? *given : dir / name;
}

void say(const CommandContext& ctx, const std::string& line) {
  if (!ctx.quiet && ctx.log) *ctx.log << line << '\n';
}

json header(const ExperimentConfig& config) {
  return json{{"config_hash", config_hash(config)}, {"schema", kConfigSchema},
              {"version", kConfigVersion}};
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

AmplitudeResponse base_response(const ExperimentConfig& config) {
  return ct_frequency_map(config.plant.to_tf(), 1, FrequencyGrid(config.grid_points));
}

json result_to_json(const SimulationResult& s) {
  return json{{"seed", s.seed},
              {"length", s.length},
              {"empirical_mse", s.empirical_mse},
              {"predicted_mse", s.predicted_mse},
              {"relative_error", (s.empirical_mse - s.predicted_mse) / s.predicted_mse},
              {"overload_count", s.overload_count},
              {"overload_rate", s.overload_rate},
              {"w_variance", s.w_variance},
              {"w_autocorr", s.w_autocorr},
              {"sigma_u_sq", s.sigma_u_sq},
              {"predicted_sigma_u_sq", s.predicted_sigma_u_sq},
              {"loop_identity_error", s.loop_identity_error},
              {"step", s.step}};
}

SimulationSetup simulation_setup(const ExperimentConfig& config, const RationalDiscreteTF& r,
                                 std::uint64_t seed) {
  const ContinuousTF plant = config.plant.to_tf();
  SimulationSetup setup{r, discretize_plant(plant, config.design.lambda), 8, 4.0, SignalModel{}};
  setup.bits = config.design.bits;
  setup.loading_factor = config.loading_factor;
  setup.input.kind = config.sim.input;
  setup.input.ct_pole = config.sim.ct_pole;
  setup.input.seed = seed;
  setup.input.length = config.sim.length;
  setup.sample_period = plant.sample_period() / config.design.lambda;
  setup.autocorr_lags = config.sim.autocorr_lags;
  setup.refine_step = config.sim.refine_step;
  setup.grid_points = config.grid_points;
  return setup;
}

CheckResult check(std::string name, double measured, double tolerance, bool passed,
                  std::string detail = {}) {
  return CheckResult{std::move(name), measured, tolerance, passed, std::move(detail)};
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig config_from_json(const json& doc) {
  Reader r;
  ExperimentConfig c;
  if (!r.object(doc, "config", {"schema", "version", "plant", "bits", "lambdas", "loading_factor",
                                "grid_points", "design", "fit", "sim"})) {
    throw ValidationError(r.issues);
  }
  if (!doc.contains("schema") || doc.at("schema") != kConfigSchema) {
    r.fail("schema", std::string("must be \"") + kConfigSchema + "\"");
  }
  if (!doc.contains("version") || doc.at("version") != kConfigVersion) {
    r.fail("version", "must be " + std::to_string(kConfigVersion));
  }

  if (doc.contains("plant") && r.object(doc.at("plant"), "plant", {"num", "den", "sample_period"})) {
    const json& p = doc.at("plant");
    r.list(p, "num", "plant", c.plant.num);
    r.list(p, "den", "plant", c.plant.den);
    r.number(p, "sample_period", "plant", c.plant.sample_period);
  }
  r.list(doc, "bits", "", c.bits_list);
  r.list(doc, "lambdas", "", c.lambda_list);
  r.number(doc, "loading_factor", "", c.loading_factor);
  r.integer(doc, "grid_points", "", c.grid_points);

  if (doc.contains("design") && r.object(doc.at("design"), "design", {"bits", "lambda", "nu"})) {
    const json& d = doc.at("design");
    r.integer(d, "bits", "design", c.design.bits);
    r.integer(d, "lambda", "design", c.design.lambda);
    if (d.contains("nu") && !d.at("nu").is_null()) {
      double nu = 0.0;
      r.number(d, "nu", "design", nu);
      c.design.nu = nu;
    }
  }
  if (doc.contains("fit") && r.object(doc.at("fit"), "fit", {"method", "order"})) {
    const json& f = doc.at("fit");
    if (f.contains("method")) {
      const json& m = f.at("method");
      if (m == "qcqp") {
        c.fit.method = FitMethod::qcqp;
      } else if (m == "yw") {
        c.fit.method = FitMethod::yule_walker;
      } else {
        r.fail("fit.method", "must be \"yw\" or \"qcqp\"");
      }
    }
    r.integer(f, "order", "fit", c.fit.order);
  }
  if (doc.contains("sim") &&
      r.object(doc.at("sim"), "sim",
               {"length", "seeds", "seed", "input", "ct_pole", "autocorr_lags", "refine_step"})) {
    const json& s = doc.at("sim");
    r.integer(s, "length", "sim", c.sim.length);
    r.integer(s, "seeds", "sim", c.sim.seeds);
    r.integer(s, "seed", "sim", c.sim.seed);
    if (s.contains("input")) {
      const json& in = s.at("input");
      if (in == "colored") {
        c.sim.input = InputKind::colored;
      } else if (in == "white") {
        c.sim.input = InputKind::white;
      } else {
        r.fail("sim.input", "must be \"colored\" or \"white\"");
      }
    }
    r.number(s, "ct_pole", "sim", c.sim.ct_pole);
    r.integer(s, "autocorr_lags", "sim", c.sim.autocorr_lags);
    r.boolean(s, "refine_step", "sim", c.sim.refine_step);
  }

  if (r.issues.empty()) validate(c, r);
  if (!r.issues.empty()) throw ValidationError(r.issues);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json design{{"bits", c.design.bits}, {"lambda", c.design.lambda}};
  design["nu"] = c.design.nu ? json(*c.design.nu) : json(nullptr);
  return json{
      {"schema", kConfigSchema},
      {"version", kConfigVersion},
      {"plant",
       {{"num", c.plant.num}, {"den", c.plant.den}, {"sample_period", c.plant.sample_period}}},
      {"bits", c.bits_list},
      {"lambdas", c.lambda_list},
      {"loading_factor", c.loading_factor},
      {"grid_points", c.grid_points},
      {"design", design},
      {"fit", {{"method", c.fit.method == FitMethod::qcqp ? "qcqp" : "yw"}, {"order", c.fit.order}}},
      {"sim",
       {{"length", c.sim.length},
        {"seeds", c.sim.seeds},
        {"seed", c.sim.seed},
        {"input", c.sim.input == InputKind::colored ? "colored" : "white"},
        {"ct_pole", c.sim.ct_pole},
        {"autocorr_lags", c.sim.autocorr_lags},
        {"refine_step", c.sim.refine_step}}}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  } catch (const ParameterError& e) {
    throw ValidationError({e.what()});
  }
  return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& config) {
  return hex64(fnv1a64(config_to_json(config).dump()));
}

json filter_to_json(const RationalDiscreteTF& filter) {
  return json{{"num", filter.num()}, {"den", filter.den()}};
}

RationalDiscreteTF filter_from_json(const json& doc) {
  Reader r;
  std::vector<double> num;
  std::vector<double> den{1.0};
  if (!doc.is_object() || !doc.contains("num")) {
    r.fail("filter", "expected an object with num and den");
    throw ValidationError(r.issues);
  }
  r.list(doc, "num", "filter", num);
  r.list(doc, "den", "filter", den);
  if (!r.issues.empty()) throw ValidationError(r.issues);
  if (den.empty() || den.front() == 0.0) throw ValidationError({"filter.den: leading coefficient is zero"});
  return RationalDiscreteTF(std::move(num), std::move(den));
}

const char* fit_method_name(FitMethod method) {
  return method == FitMethod::qcqp ? "qcqp" : "yw";
}

CellProblem cell_problem(const ExperimentConfig& config, int bits, int lambda,
                         std::optional<double> nu) {
  const double gamma = nu ? *nu - 1.0 : gamma_from_bits(bits, config.loading_factor);
  return CellProblem{oversample_response(base_response(config), lambda), gamma};
}

FitReport fit_cell(const CellProblem& cell, const OptimalDesign& design, FitMethod method,
                   std::size_t order) {
  if (method == FitMethod::qcqp) {
    const FirFit fir = norm_constrained_fir(cell.p, order, design.norm_r_sq);
    FitReport report =
        evaluate_fit(fir.filter.as_tf(), cell.p, cell.gamma, design.distortion, "qcqp");
    report.kkt_multiplier = fir.kkt_multiplier;
    return report;
  }
  return evaluate_fit(yule_walker_fit(design.r_opt, order), cell.p, cell.gamma,
                      design.distortion, "yw");
}

json cmd_design(const CommandContext& ctx) {
  const ExperimentConfig& config = ctx.config;
  const DesignCell& cell_cfg = config.design;
  const CellProblem cell = cell_problem(config, cell_cfg.bits, cell_cfg.lambda, cell_cfg.nu);
  const DesignProblem prob(cell.p, cell.gamma);
  const OptimalDesign design = solve_alpha_opt(prob);
  const double uniform = l2_norm_sq(cell.p) / cell.gamma;
  const double t = design.theta_opt;

  json doc = header(config);
  doc["bits"] = cell_cfg.bits;
  doc["lambda"] = cell_cfg.lambda;
  doc["gamma"] = cell.gamma;
  doc["nu"] = prob.nu();
  doc["alpha_opt"] = design.alpha_opt;
  doc["theta"] = t;
  doc["distortion"] = design.distortion;
  doc["distortion_db"] = to_db(design.distortion);
  doc["distortion_uniform"] = uniform;
  doc["distortion_uniform_db"] = to_db(uniform);
  doc["gain_db"] = to_db(uniform / design.distortion);
  doc["norm_r_sq"] = design.norm_r_sq;
  doc["feasibility_margin"] = prob.nu() - design.norm_r_sq;
  doc["n_of_alpha"] = design.n_of_alpha;
  doc["root_residual"] = std::abs(t * t / design.alpha_opt - prob.nu()) / prob.nu();
  doc["r_opt_log_mean"] = log_geometric_mean(design.r_opt);
  doc["constant_plant"] = design.constant_plant;
  doc["grid_points"] = config.grid_points;

  CsvTable table{config_hash(config), {"omega", "p", "r_opt"}, {}};
  const FrequencyGrid& grid = cell.p.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    table.rows.push_back({grid.omega(i), cell.p[i], design.r_opt[i]});
  }
  write_text_file(ctx.out_dir / "design.json", dump(doc));
  write_text_file(ctx.out_dir / "r_opt.csv", to_csv(table));
  say(ctx, "design: alpha_opt=" + format_double(design.alpha_opt) +
               " D_db=" + format_double(to_db(design.distortion)) +
               " gain_db=" + format_double(to_db(uniform / design.distortion)));
  return doc;
}

std::vector<RdRow> cmd_rd_curve(const CommandContext& ctx) {
  const ExperimentConfig& config = ctx.config;
  const std::vector<RdRow> rows = rd_curve(base_response(config), config.bits_list,
                                           config.lambda_list, config.loading_factor, ctx.workers);
  CsvTable table{config_hash(config),
                 {"bits", "lambda", "gamma", "D_db", "D_uniform_db", "bound_db", "theorem3_residual"},
                 {}};
  json doc = header(config);
  doc["rows"] = json::array();
  for (const RdRow& row : rows) {
    table.rows.push_back({static_cast<double>(row.bits), static_cast<double>(row.lambda), row.gamma,
                          to_db(row.distortion), to_db(row.distortion_uniform), to_db(row.bound),
                          row.theorem3_residual});
    doc["rows"].push_back({{"bits", row.bits},
                           {"lambda", row.lambda},
                           {"gamma", row.gamma},
                           {"distortion", row.distortion},
                           {"distortion_uniform", row.distortion_uniform},
                           {"bound", row.bound},
                           {"theorem3_residual", row.theorem3_residual},
                           {"root_residual", row.root_residual}});
  }
  write_text_file(ctx.out_dir / "rd_curve.csv", to_csv(table));
  write_text_file(ctx.out_dir / "rd_curve.json", dump(doc));
  say(ctx, "rd-curve: " + std::to_string(rows.size()) + " rows");
  return rows;
}

FitReport cmd_fit(const CommandContext& ctx) {
  const ExperimentConfig& config = ctx.config;
  const auto design_path = input_or_default(ctx.design_path, ctx.out_dir, "design.json");
  json artifact;
  try {
    artifact = json::parse(read_text_file(design_path));
  } catch (const json::parse_error& e) {
    throw ValidationError({design_path.string() + ": " + e.what()});
  } catch (const ParameterError& e) {
    throw ValidationError({std::string(e.what()) + " (run design first)"});
  }
  const std::string hash = config_hash(config);
  if (!artifact.contains("config_hash") || artifact.at("config_hash") != hash) {
    throw ValidationError({design_path.string() +
                           ": config_hash does not match the current configuration " + hash});
  }

  const CellProblem cell =
      cell_problem(config, config.design.bits, config.design.lambda, config.design.nu);
  const OptimalDesign design = solve_alpha_opt(DesignProblem(cell.p, cell.gamma));
  if (!artifact.contains("alpha_opt") || artifact.at("alpha_opt").get<double>() != design.alpha_opt) {
    throw InvariantError("design artifact alpha_opt differs from the recomputed design");
  }

  const FitReport report = fit_cell(cell, design, config.fit.method, config.fit.order);
  json filter = header(config);
  filter["method"] = report.method;
  filter.update(filter_to_json(report.fitted));

  json doc = header(config);
  doc["method"] = report.method;
  doc["order"] = config.fit.order;
  doc["bits"] = config.design.bits;
  doc["lambda"] = config.design.lambda;
  doc["nu"] = cell.gamma + 1.0;
  doc["achieved_mse"] = report.feasible ? json(report.achieved_mse) : json(nullptr);
  doc["ideal_mse"] = report.ideal_mse;
  doc["loss_db"] = report.feasible ? json(report.loss_db()) : json(nullptr);
  doc["norm_sq"] = report.norm_sq;
  doc["feasible"] = report.feasible;
  doc["kkt_multiplier"] =
      std::isfinite(report.kkt_multiplier) ? json(report.kkt_multiplier) : json("inf");
  doc["max_pole_magnitude"] = report.fitted.max_pole_magnitude();

  write_text_file(ctx.out_dir / "filter.json", dump(filter));
  write_text_file(ctx.out_dir / "fit_report.json", dump(doc));
  if (!report.feasible) {
    throw InfeasibleError("fitted filter violates ||R||^2 < nu (||R||^2 = " +
                          format_double(report.norm_sq) + ", nu = " + format_double(cell.gamma + 1.0) +
                          ")");
  }
  say(ctx, std::string("fit: ") + report.method + " loss_db=" + format_double(report.loss_db()));
  return report;
}

json cmd_simulate(const CommandContext& ctx) {
  const ExperimentConfig& config = ctx.config;
  const auto filter_path = input_or_default(ctx.filter_path, ctx.out_dir, "filter.json");
  json filter_doc;
  try {
    filter_doc = json::parse(read_text_file(filter_path));
  } catch (const json::parse_error& e) {
    throw ValidationError({filter_path.string() + ": " + e.what()});
  } catch (const ParameterError& e) {
    throw ValidationError({std::string(e.what()) + " (run fit first)"});
  }
  const RationalDiscreteTF r = filter_from_json(filter_doc);

  const std::size_t seeds = config.sim.seeds;
  std::vector<SimulationResult> results(seeds);
  LoopTraces first_trace;
  parallel_for(seeds, ctx.workers, [&](std::size_t i) {
    const SimulationSetup setup = simulation_setup(config, r, config.sim.seed + i);
    results[i] = simulate(setup, i == 0 && ctx.write_trace ? &first_trace : nullptr);
  });

  const std::string hash = config_hash(config);
  double mean = 0.0;
  double max_overload = 0.0;
  double max_identity = 0.0;
  double sigma_u_mean = 0.0;
  for (const auto& s : results) {
    mean += s.empirical_mse;
    max_overload = std::max(max_overload, s.overload_rate);
    max_identity = std::max(max_identity, s.loop_identity_error);
    sigma_u_mean += s.sigma_u_sq;
    json doc = header(config);
    doc.update(result_to_json(s));
    write_text_file(ctx.out_dir / ("simulate_seed_" + std::to_string(s.seed) + ".json"), dump(doc));
  }
  mean /= static_cast<double>(seeds);
  sigma_u_mean /= static_cast<double>(seeds);
  double var = 0.0;
  for (const auto& s : results) var += (s.empirical_mse - mean) * (s.empirical_mse - mean);
  const double sd = seeds > 1 ? std::sqrt(var / static_cast<double>(seeds - 1)) : 0.0;
  const double half_width = 1.96 * sd / std::sqrt(static_cast<double>(seeds));
  const double predicted = results.front().predicted_mse;

  json summary = header(config);
  summary["bits"] = config.design.bits;
  summary["lambda"] = config.design.lambda;
  summary["seeds"] = seeds;
  summary["length"] = config.sim.length;
  summary["filter_config_hash"] = filter_doc.value("config_hash", "");
  summary["predicted_mse"] = predicted;
  summary["empirical_mse_mean"] = mean;
  summary["empirical_mse_sd"] = sd;
  summary["empirical_mse_ci95"] = {mean - half_width, mean + half_width};
  summary["relative_error"] = (mean - predicted) / predicted;
  summary["max_overload_rate"] = max_overload;
  summary["max_loop_identity_error"] = max_identity;
  summary["sigma_u_sq_mean"] = sigma_u_mean;
  summary["predicted_sigma_u_sq"] = results.front().predicted_sigma_u_sq;
  write_text_file(ctx.out_dir / "simulate_summary.json", dump(summary));

  if (ctx.write_trace) {
    const SimulationSetup setup = simulation_setup(config, r, config.sim.seed);
    const std::vector<double> x = setup.input.kind == InputKind::colored
                                      ? gen_colored_input(setup.input, setup.sample_period)
                                      : gen_white_input(setup.input);
    CsvTable trace{hash, {"k", "x", "u", "v", "w", "overload"}, {}};
    trace.rows.reserve(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      trace.rows.push_back({static_cast<double>(k), x[k], first_trace.u[k], first_trace.v[k],
                            first_trace.w[k], static_cast<double>(first_trace.overload[k])});
    }
    write_text_file(ctx.out_dir / ("trace_seed_" + std::to_string(config.sim.seed) + ".csv"),
                    to_csv(trace));
  }
  say(ctx, "simulate: empirical=" + format_double(mean) + " predicted=" + format_double(predicted) +
               " max_overload=" + format_double(max_overload));
  return summary;
}

std::vector<CheckResult> cmd_verify(const CommandContext& ctx) {
  const ExperimentConfig& config = ctx.config;
  std::vector<CheckResult> checks;
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      checks.push_back(check(name, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()));
    }
  };

  guarded("rd_sweep", [&] {
    const std::vector<RdRow> rows = rd_curve(base_response(config), config.bits_list,
                                             config.lambda_list, config.loading_factor, ctx.workers);
    double root = 0.0;
    double t3 = 0.0;
    double bound = -std::numeric_limits<double>::infinity();
    double decrease = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      root = std::max(root, rows[i].root_residual);
      t3 = std::max(t3, rows[i].theorem3_residual);
      bound = std::max(bound, (rows[i].distortion - rows[i].bound) / rows[i].bound);
      for (std::size_t j = 0; j < i; ++j) {
        if (rows[j].lambda == rows[i].lambda && rows[j].bits < rows[i].bits) {
          decrease = std::max(decrease, rows[i].distortion / rows[j].distortion - 1.0);
        }
      }
    }
    checks.push_back(check("root_residual", root, 1e-10, root <= 1e-10));
    checks.push_back(check("theorem3_residual", t3, 1e-6, t3 <= 1e-6));
    checks.push_back(check("upper_bound_excess", bound, 0.0, bound <= 0.0));
    if (std::isfinite(decrease)) {
      checks.push_back(check("distortion_decreasing_in_bits", decrease, 0.0, decrease < 0.0));
    }
  });

  const CellProblem cell =
      cell_problem(config, config.design.bits, config.design.lambda, config.design.nu);
  std::optional<OptimalDesign> design;
  guarded("design", [&] {
    design = solve_alpha_opt(DesignProblem(cell.p, cell.gamma));
    const double nu = cell.gamma + 1.0;
    const double log_mean = std::abs(log_geometric_mean(design->r_opt));
    checks.push_back(check("r_opt_log_mean", log_mean, 1e-8, log_mean <= 1e-8));
    checks.push_back(check("feasibility_margin", nu - design->norm_r_sq, 0.0,
                           nu - design->norm_r_sq > 0.0));
  });

  if (design && !design->constant_plant) {
    guarded("theta_ratio_decreasing", [&] {
      const double a = design->alpha_opt;
      int violations = 0;
      double prev = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= 64; ++k) {
        const double alpha = a * std::pow(10.0, -3.0 + 6.0 * k / 64.0);
        const double v = log_theta_sq_over_alpha(alpha, cell.p);
        if (!(v < prev)) ++violations;
        prev = v;
      }
      checks.push_back(check("theta_ratio_decreasing", violations, 0.0, violations == 0));
    });
    guarded("phi_stationary", [&] {
      const DesignProblem prob(cell.p, cell.gamma);
      const double a = design->alpha_opt;
      const double h = 1e-4;
      const double slope = (phi(a * (1 + h), prob) - phi(a * (1 - h), prob)) / (2 * h * phi(a, prob));
      checks.push_back(check("phi_stationary", std::abs(slope), 1e-5, std::abs(slope) <= 1e-5));
    });
  }

  if (design) {
    guarded("qcqp_kkt", [&] {
      const FirFit fir = norm_constrained_fir(cell.p, config.fit.order, design->norm_r_sq);
      const double stat = fir.stationarity_residual / std::max(fir.gradient_norm, 1e-300);
      const double comp = std::isfinite(fir.kkt_multiplier) ? std::abs(fir.kkt_multiplier * fir.slack) : 0.0;
      checks.push_back(check("kkt_stationarity", stat, 1e-8, stat <= 1e-8));
      checks.push_back(check("kkt_complementarity", comp, 1e-8, comp <= 1e-8));
    });
    guarded("fit", [&] {
      const FitReport report = fit_cell(cell, *design, config.fit.method, config.fit.order);
      const double head = impulse_response(report.fitted, 1).front();
      checks.push_back(check("fit_unity_head", std::abs(head - 1.0), 0.0, head == 1.0));
      checks.push_back(check("fit_feasible", report.norm_sq, cell.gamma + 1.0, report.feasible));

      SimulationSetup setup = simulation_setup(config, report.fitted, config.sim.seed);
      setup.input.length = std::min<std::size_t>(config.sim.length, 50000);
      const SimulationResult sim = simulate(setup);
      checks.push_back(check("loop_identity", sim.loop_identity_error, 1e-10,
                             sim.loop_identity_error <= 1e-10));
    });
  }

  guarded("grid_convergence", [&] {
    ExperimentConfig fine = config;
    fine.grid_points = 2 * config.grid_points;
    const CellProblem coarse_cell = cell_problem(config, config.design.bits, 1, config.design.nu);
    const CellProblem fine_cell = cell_problem(fine, config.design.bits, 1, config.design.nu);
    const double a0 = solve_alpha_opt(DesignProblem(coarse_cell.p, coarse_cell.gamma)).alpha_opt;
    const double a1 = solve_alpha_opt(DesignProblem(fine_cell.p, fine_cell.gamma)).alpha_opt;
    const double delta = std::abs(a1 - a0) / a1;
    checks.push_back(check("grid_convergence", delta, 1e-6, delta < 1e-6,
                           "grid " + std::to_string(config.grid_points) + " -> " +
                               std::to_string(fine.grid_points)));
  });

  json doc = header(config);
  doc["checks"] = json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    doc["checks"].push_back({{"name", c.name},
                             {"measured", std::isfinite(c.measured) ? json(c.measured) : json(nullptr)},
                             {"tolerance", c.tolerance},
                             {"passed", c.passed},
                             {"detail", c.detail}});
    say(ctx, std::string(c.passed ? "PASS " : "FAIL ") + c.name + " measured=" +
                 format_double(c.measured) + " tolerance=" + format_double(c.tolerance) +
                 (c.detail.empty() ? "" : " (" + c.detail + ")"));
  }
  doc["passed"] = all;
  write_text_file(ctx.out_dir / "verify.json", dump(doc));
  return checks;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InvariantError*>(&error)) return 3;
  if (dynamic_cast<const NumericalError*>(&error) || dynamic_cast<const InfeasibleError*>(&error)) {
    return 2;
  }
  if (dynamic_cast<const Error*>(&error) || dynamic_cast<const json::exception*>(&error) ||
      dynamic_cast<const std::filesystem::filesystem_error*>(&error)) {
    return 1;
  }
  return 2;
}

}  // namespace efq
