#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "efq/design.hpp"
#include "efq/fit.hpp"
#include "efq/simulate.hpp"
#include "efq/spectral.hpp"

namespace efq {

inline constexpr const char* kConfigSchema = "efq.experiment";
inline constexpr int kConfigVersion = 1;

struct PlantConfig {
  std::vector<double> num{1.029, 4.589, 7.146, 3.882};
  std::vector<double> den{1.0, 5.088, 9.789, 8.296, 2.548};
  double sample_period = 0.1;

  ContinuousTF to_tf() const { return ContinuousTF(num, den, sample_period); }
};

/// The (bits, lambda) cell used by design, fit and simulate. A nu override
/// replaces the bits-derived gamma in the design and fit steps.
struct DesignCell {
  int bits = 8;
  int lambda = 1;
  std::optional<double> nu;
};

enum class FitMethod { yule_walker, qcqp };

struct FitConfig {
  FitMethod method = FitMethod::qcqp;
  std::size_t order = 4;
};

struct SimConfig {
  std::size_t length = 1000000;
  std::size_t seeds = 5;
  std::uint64_t seed = 1;
  InputKind input = InputKind::colored;
  double ct_pole = 2.62;
  std::size_t autocorr_lags = 8;
  bool refine_step = false;
};

struct ExperimentConfig {
  PlantConfig plant;
  std::vector<int> bits_list{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> lambda_list{1, 2, 3, 4};
  double loading_factor = 4.0;
  std::size_t grid_points = FrequencyGrid::kDefaultPoints;
  DesignCell design;
  FitConfig fit;
  SimConfig sim;
};

ExperimentConfig default_config();

/// Parses and validates. Every problem is collected with its field path and
/// reported in one ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Hex FNV-1a of the canonical JSON serialization.
std::string config_hash(const ExperimentConfig& config);

nlohmann::json filter_to_json(const RationalDiscreteTF& filter);
RationalDiscreteTF filter_from_json(const nlohmann::json& doc);

const char* fit_method_name(FitMethod method);

/// Plant magnitude at the design cell and the matching gamma.
struct CellProblem {
  AmplitudeResponse p;
  double gamma;
};
CellProblem cell_problem(const ExperimentConfig& config, int bits, int lambda,
                         std::optional<double> nu = std::nullopt);

/// Order-`order` fit of the ideal design by the configured method.
FitReport fit_cell(const CellProblem& cell, const OptimalDesign& design, FitMethod method,
                   std::size_t order);

struct CommandContext {
  ExperimentConfig config;
  std::filesystem::path out_dir = ".";
  bool quiet = false;
  std::size_t workers = 1;
  std::ostream* log = nullptr;
  /// Inputs of fit and simulate; default to files under out_dir.
  std::optional<std::filesystem::path> design_path;
  std::optional<std::filesystem::path> filter_path;
  /// Write the first seed's trace CSV during simulate.
  bool write_trace = false;
};

/// design.json and r_opt.csv.
nlohmann::json cmd_design(const CommandContext& ctx);
/// rd_curve.csv and rd_curve.json.
std::vector<RdRow> cmd_rd_curve(const CommandContext& ctx);
/// filter.json and fit_report.json.
FitReport cmd_fit(const CommandContext& ctx);
/// simulate_seed_<n>.json per seed and simulate_summary.json.
nlohmann::json cmd_simulate(const CommandContext& ctx);

struct CheckResult {
  std::string name;
  double measured;
  double tolerance;
  bool passed;
  std::string detail;
};

/// Runs the invariant checks and writes verify.json; never throws for a
/// failed check.
std::vector<CheckResult> cmd_verify(const CommandContext& ctx);

/// Exit code for an exception escaping a command: 1 validation, 2 numerical,
/// 3 invariant.
int exit_code_for(const std::exception& error);

}  // namespace efq
