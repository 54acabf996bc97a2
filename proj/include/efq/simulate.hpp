#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "efq/design.hpp"
#include "efq/spectral.hpp"

namespace efq {

/// Mid-rise quantizer with step d and saturation level L.
struct MidRiseQuantizer {
  double step;
  double saturation;

  MidRiseQuantizer(double step, double saturation);
  explicit MidRiseQuantizer(const QuantizerSpec& spec)
      : MidRiseQuantizer(spec.step, spec.saturation) {}
};

struct QuantizedSample {
  double value;
  bool overloaded;
};

/// (i + 1/2) d for xi in [i d, (i+1) d); clamps to +-L with the overload
/// flag set when |xi| > L + d/2.
QuantizedSample quantize_midrise(double xi, const MidRiseQuantizer& q);

enum class InputKind { colored, white };

struct SignalModel {
  InputKind kind = InputKind::colored;
  /// Continuous-time pole of the input spectrum c |1/(j w + pole)|^2.
  double ct_pole = 2.62;
  std::uint64_t seed = 1;
  std::size_t length = 1000000;
  double variance = 1.0;
};

/// Sampled first-order Gauss-Markov process with pole exp(-ct_pole * T),
/// rescaled to the target sample variance.
std::vector<double> gen_colored_input(const SignalModel& model, double sample_period);

/// Zero-mean Gaussian sequence with the model's variance.
std::vector<double> gen_white_input(const SignalModel& model);

/// Signals of the error-feedback loop u = x + (R - 1) w, v = Q(u), w = v - u.
struct LoopTraces {
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> w;
  std::vector<std::uint8_t> overload;
  std::size_t overload_count = 0;
};

/// Runs the feedback loop. R must be stable with a unity impulse-response
/// head so that R - 1 is strictly causal.
LoopTraces run_feedback_loop(const std::vector<double>& x, const RationalDiscreteTF& r,
                             const MidRiseQuantizer& q);

/// Direct-form filtering of x through num/den.
std::vector<double> filter_signal(const RationalDiscreteTF& h, const std::vector<double>& x);

/// Bilinear transform at period T_s / lambda.
RationalDiscreteTF discretize_plant(const ContinuousTF& plant, int lambda = 1);

/// Samples discarded before variance estimates: max(1000, 20 * time constant).
std::size_t burn_in_length(const RationalDiscreteTF& plant);

/// Sample variance of P (v - x) after the burn-in prefix.
double empirical_mse(const std::vector<double>& v, const std::vector<double>& x,
                     const RationalDiscreteTF& plant);

/// Normalized sample autocorrelation at lags 1..max_lag.
std::vector<double> whiteness_stat(const std::vector<double>& w, std::size_t max_lag);

struct SimulationResult {
  std::uint64_t seed = 0;
  std::size_t length = 0;
  double empirical_mse = 0.0;
  double predicted_mse = 0.0;
  std::size_t overload_count = 0;
  double overload_rate = 0.0;
  double w_variance = 0.0;
  /// Normalized autocorrelation of w at lags 0..K (lag 0 is 1).
  std::vector<double> w_autocorr;
  double sigma_u_sq = 0.0;
  double predicted_sigma_u_sq = 0.0;
  /// max_k |(v - x)_k - (R w)_k|.
  double loop_identity_error = 0.0;
  double step = 0.0;
};

/// Everything a single simulation run needs.
struct SimulationSetup {
  RationalDiscreteTF shaping_filter;
  /// Discrete plant applied to the output error.
  RationalDiscreteTF plant;
  int bits = 8;
  double loading_factor = 4.0;
  SignalModel input;
  /// Continuous-time sample period of the input process.
  double sample_period = 0.1;
  std::size_t autocorr_lags = 8;
  /// Resize the quantizer step from the measured sigma_u and rerun once.
  bool refine_step = false;
  std::size_t grid_points = FrequencyGrid::kDefaultPoints;
};

/// Sizes the quantizer from the predicted sigma_u, runs the loop and compares
/// the output MSE to the prediction ||P R||^2 sigma_w^2 for the simulated plant.
SimulationResult simulate(const SimulationSetup& setup, LoopTraces* traces = nullptr);

}  // namespace efq
