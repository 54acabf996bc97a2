#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "efq/spectral.hpp"

namespace efq {

/// FIR noise shaper with taps h_0..h_M in ascending delay; h_0 == 1.
struct FIRFilter {
  std::vector<double> taps;

  RationalDiscreteTF as_tf() const { return RationalDiscreteTF(taps, {1.0}); }
};

/// Result of the norm-constrained least-squares FIR design.
struct FirFit {
  FIRFilter filter;
  /// ||P R||^2 at the solution.
  double objective;
  /// ||R||^2 = 1 + ||x||^2.
  double norm_sq;
  /// Lagrange multiplier of ||x||^2 <= budget - 1; +inf when budget == 1.
  double kkt_multiplier;
  /// ||(A + mu I) x + b|| and ||b|| for the KKT certificate.
  double stationarity_residual;
  double gradient_norm;
  /// budget - 1 - ||x||^2 (nonnegative up to round-off).
  double slack;
};

/// Achieved versus ideal MSE of a realizable shaping filter.
struct FitReport {
  RationalDiscreteTF fitted;
  std::string method;
  /// ||p R||^2 / (nu - ||R||^2); +inf when infeasible.
  double achieved_mse;
  double ideal_mse;
  double norm_sq;
  bool feasible;
  double kkt_multiplier = 0.0;

  double loss_db() const;
};

/// First `length` impulse-response samples by direct recursion.
std::vector<double> impulse_response(const RationalDiscreteTF& filter, std::size_t length);

/// Impulse response truncated once the geometric tail estimate from the
/// largest pole radius drops below 1e-14 of the accumulated energy; capped
/// at kMaxImpulseLength samples. FIR filters return their taps.
std::vector<double> impulse_response_truncated(const RationalDiscreteTF& filter);
inline constexpr std::size_t kMaxImpulseLength = 16384;

/// Scales the numerator so the impulse response starts with exactly 1.
RationalDiscreteTF normalize_head(const RationalDiscreteTF& filter);

/// Levinson-Durbin solution of the order-p Toeplitz normal equations.
/// Returns the monic predictor [1, a_1, ..., a_p] and, through the optional
/// out-parameter, the reflection coefficients.
std::vector<double> levinson_durbin(const std::vector<double>& autocorr, std::size_t order,
                                    std::vector<double>* reflection = nullptr);

/// Autocorrelation (1/2pi) int s(w) cos(k w) for k = 0..max_lag of the power
/// spectrum s = amplitude^2.
std::vector<double> autocorrelation_of(const AmplitudeResponse& amplitude, std::size_t max_lag);

/// IIR magnitude fit: Levinson AR denominator from target^2, MA numerator
/// from the residual spectrum by spectral factorization, then head
/// normalization. The two steps are repeated with the AR part refit to
/// target / |numerator| while the RMS magnitude error keeps falling. A
/// second start from the extended (lag > order) Yule-Walker equations is
/// refined the same way and the smaller RMS error wins. Numerator and
/// denominator have the same order.
RationalDiscreteTF yule_walker_fit(const AmplitudeResponse& target, std::size_t order);

/// Exact minimizer of ||P R||^2 over FIR R of the given order with h_0 = 1
/// and ||R||^2 <= norm_budget. The Gram matrix comes from the truncated
/// impulse response of P.
FirFit norm_constrained_fir(const RationalDiscreteTF& plant, std::size_t order,
                            double norm_budget);

/// Same problem with the Gram matrix taken from the plant magnitude by
/// cosine quadrature, so band-limited responses without a rational
/// realization are supported.
FirFit norm_constrained_fir(const AmplitudeResponse& plant, std::size_t order,
                            double norm_budget);

/// Solves the trust-region-type subproblem min x'Ax + 2b'x s.t. ||x||^2 <= radius_sq
/// for the Toeplitz system built from autocorrelation lags 0..order.
FirFit norm_constrained_fir_from_autocorr(const std::vector<double>& autocorr,
                                          std::size_t order, double norm_budget);

/// Evaluates ||p R||^2 / (nu - ||R||^2) with |R| sampled on p's layout.
FitReport evaluate_fit(const RationalDiscreteTF& fit, const AmplitudeResponse& p, double gamma,
                       double ideal_mse, std::string method = "external");

}  // namespace efq
