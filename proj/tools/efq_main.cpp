#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "efq/errors.hpp"
#include "efq/experiment.hpp"
#include "efq/parallel.hpp"

namespace {

int run(const std::string& command, efq::CommandContext& ctx) {
  if (command == "design") {
    efq::cmd_design(ctx);
  } else if (command == "rd-curve") {
    efq::cmd_rd_curve(ctx);
  } else if (command == "fit") {
    efq::cmd_fit(ctx);
  } else if (command == "simulate") {
    efq::cmd_simulate(ctx);
  } else if (command == "verify") {
    for (const auto& check : efq::cmd_verify(ctx)) {
      if (!check.passed) return 3;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-feedback quantizer design, analysis and simulation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid;
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment configuration (JSON)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Override sim.seed");
  app.add_option("--grid", grid, "Override grid_points");
  app.add_flag("--quiet", quiet, "Suppress progress output");

  std::optional<std::string> design_path;
  std::optional<std::string> filter_path;
  bool trace = false;
  app.add_subcommand("design", "Optimal shaping amplitude for the configured cell");
  app.add_subcommand("rd-curve", "Distortion versus bits and oversampling ratio");
  app.add_subcommand("fit", "Fit a realizable filter to the design")
      ->add_option("--design", design_path, "Design artifact (default OUT/design.json)");
  auto* sim = app.add_subcommand("simulate", "Time-domain simulation over seeds");
  sim->add_option("--filter", filter_path, "Filter file (default OUT/filter.json)");
  sim->add_flag("--trace", trace, "Write the first seed's trace CSV");
  app.add_subcommand("verify", "Invariant checks; exit code 3 on failure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    efq::ExperimentConfig config =
        config_path ? efq::load_config(*config_path) : efq::default_config();
    if (seed) config.sim.seed = *seed;
    if (grid) config.grid_points = *grid;
    config = efq::config_from_json(efq::config_to_json(config));

    efq::CommandContext ctx;
    ctx.config = std::move(config);
    ctx.out_dir = out_dir;
    ctx.quiet = quiet;
    ctx.workers = efq::default_worker_count();
    ctx.log = &std::cout;
    if (design_path) ctx.design_path = *design_path;
    if (filter_path) ctx.filter_path = *filter_path;
    ctx.write_trace = trace;
    return run(app.get_subcommands().front()->get_name(), ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return efq::exit_code_for(e);
  }
}
