#pragma once

#include <cstddef>
#include <vector>

#include "efq/spectral.hpp"

namespace efq {

/// Plant magnitude and quantizer ratio gamma = sigma_u^2 / sigma_w^2.
/// nu = gamma + 1 is always derived, never stored.
class DesignProblem {
 public:
  DesignProblem(AmplitudeResponse p, double gamma);

  const AmplitudeResponse& p() const { return p_; }
  double gamma() const { return gamma_; }
  double nu() const { return gamma_ + 1.0; }

 private:
  AmplitudeResponse p_;
  double gamma_;
};

/// Optimal noise-shaping amplitude r_opt = theta / sqrt(p^2 + alpha_opt).
struct OptimalDesign {
  double alpha_opt;
  double theta_opt;
  AmplitudeResponse r_opt;
  /// Minimum output MSE per unit input variance; equals alpha_opt.
  double distortion;
  /// C(alpha_opt) = ||r_opt||^2, strictly below nu.
  double norm_r_sq;
  /// N(alpha_opt) = ||p r_opt||^2.
  double n_of_alpha;
  /// True when p was almost constant and r_opt == 1 was returned directly.
  bool constant_plant = false;
};

/// Mid-rise quantizer sizing: 2L = (2^bits - 1) d and L = loading_factor * sigma_u.
struct QuantizerSpec {
  int bits;
  double loading_factor;
  double step;
  double saturation;
  double gamma;

  static QuantizerSpec from_input_std(int bits, double loading_factor, double sigma_u);
};

inline constexpr double kAlmostConstantTol = 1e-9;

/// theta(alpha) = exp((1/4pi) int ln(p^2 + alpha)).
double theta(double alpha, const AmplitudeResponse& p);

/// N(alpha) = theta^2 (1/2pi) int p^2 / (p^2 + alpha).
double capital_N(double alpha, const AmplitudeResponse& p);

/// C(alpha) = ||r_alpha||^2 = theta^2 (1/2pi) int 1 / (p^2 + alpha).
double capital_C(double alpha, const AmplitudeResponse& p);

/// Phi(alpha) = N / (nu - C). Throws InfeasibleError when C >= nu.
double phi(double alpha, const DesignProblem& prob);

/// log(theta^2(alpha) / alpha), strictly decreasing in alpha.
double log_theta_sq_over_alpha(double alpha, const AmplitudeResponse& p);

/// r_alpha = theta(alpha) / sqrt(p^2 + alpha).
AmplitudeResponse optimal_r(double alpha, const AmplitudeResponse& p);

/// Finds alpha_opt with theta^2(alpha)/alpha = nu by bracketing bisection.
OptimalDesign solve_alpha_opt(const DesignProblem& prob);

/// gamma = 3 (2^bits - 1)^2 / loading_factor^2 (uniform error d^2/12).
double gamma_from_bits(int bits, double loading_factor);

/// sigma_w^2 = sigma_x^2 / (nu - ||R||^2).
double predicted_sigma_w_sq(double norm_r_sq, double nu, double sigma_x_sq);
double predicted_sigma_w_sq(const OptimalDesign& design, double sigma_x_sq,
                            const DesignProblem& prob);

/// sigma_u^2 = sigma_x^2 + ||R - 1||^2 sigma_w^2, with ||R-1||^2 = ||R||^2 - 1.
double predicted_sigma_u_sq(double norm_r_sq, double nu, double sigma_x_sq);

/// ||p r||^2 sigma_w^2 for an arbitrary shaping amplitude r.
double predicted_output_mse(const AmplitudeResponse& r, const AmplitudeResponse& p,
                            double gamma, double sigma_x_sq);
double predicted_output_mse(const OptimalDesign& design, const AmplitudeResponse& p,
                            double gamma, double sigma_x_sq);

struct RdPoint {
  double distortion;
  double alpha;
  double gamma;
  double nu;
};

/// D(nu, lambda) for a quantizer with `bits` bits at the given loading factor.
RdPoint rd_point(const AmplitudeResponse& p_base, int lambda, int bits, double loading_factor);

/// ||p||^2 / (nu^lambda - 1), with p the non-oversampled response.
double upper_bound(double nu, int lambda, const AmplitudeResponse& p_base);

struct RdRow {
  int bits;
  int lambda;
  double gamma;
  double distortion;
  double distortion_uniform;
  double bound;
  /// |D(nu, lambda) - D(nu^lambda, 1)| / D(nu, lambda).
  double theorem3_residual;
  /// |theta^2(alpha)/alpha - nu| / nu at the returned root.
  double root_residual;
};

/// One row per (bits, lambda), ordered by bits then lambda. Rows are
/// evaluated on up to `workers` threads; output order does not depend on it.
std::vector<RdRow> rd_curve(const AmplitudeResponse& p_base, const std::vector<int>& bits_list,
                            const std::vector<int>& lambda_list, double loading_factor,
                            std::size_t workers = 1);

/// 10 log10 of a power ratio.
double to_db(double power);

}  // namespace efq
