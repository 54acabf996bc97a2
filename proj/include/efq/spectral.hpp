#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "efq/errors.hpp"

namespace efq {

/// Uniform grid of angular frequencies on [0, pi], endpoints included.
///
/// Only the nonnegative half is stored. Integrals of even integrands over
/// [-pi, pi] are taken as twice the trapezoid sum over [0, pi].
class FrequencyGrid {
 public:
  static constexpr std::size_t kMinPoints = 64;
  static constexpr std::size_t kDefaultPoints = 8192;

  explicit FrequencyGrid(std::size_t n_points = kDefaultPoints);

  std::size_t size() const { return n_points_; }
  double spacing() const { return spacing_; }
  double omega(std::size_t i) const {
    return i + 1 == n_points_ ? std::numbers::pi : static_cast<double>(i) * spacing_;
  }
  std::vector<double> omegas() const;

  bool operator==(const FrequencyGrid& other) const { return n_points_ == other.n_points_; }

 private:
  std::size_t n_points_;
  double spacing_;
};

/// Jump discontinuity at a band edge. Grid samples with omega <= edge belong
/// to the left side; samples above it to the right side.
struct BandEdge {
  double omega;
  double left;
  double right;
};

/// Nonnegative magnitude samples on a FrequencyGrid, optionally with one jump.
///
/// The jump carries the exact left and right limits at the edge so that
/// quadrature over a band-limited response does not lose an O(h) term at
/// a cutoff that falls between grid nodes.
class AmplitudeResponse {
 public:
  AmplitudeResponse(FrequencyGrid grid, std::vector<double> values,
                    std::optional<BandEdge> edge = std::nullopt);

  /// Constant response on the grid.
  static AmplitudeResponse constant(FrequencyGrid grid, double value);

  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::optional<BandEdge>& edge() const { return edge_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Index of the last grid node on the left side of the edge (n-1 without an edge).
  std::size_t last_in_band() const { return last_in_band_; }

  /// Applies f(value) to every sample and both sides of the edge.
  template <class F>
  AmplitudeResponse map(F&& f) const {
    std::vector<double> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = f(values_[i]);
    std::optional<BandEdge> edge;
    if (edge_) edge = BandEdge{edge_->omega, f(edge_->left), f(edge_->right)};
    return AmplitudeResponse(grid_, std::move(out), edge);
  }

  /// Pointwise f(a, b) of two responses sharing grid and edge location.
  template <class F>
  static AmplitudeResponse combine(const AmplitudeResponse& a, const AmplitudeResponse& b,
                                   F&& f) {
    a.require_same_layout(b);
    std::vector<double> out(a.values_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.values_[i], b.values_[i]);
    std::optional<BandEdge> edge;
    if (a.edge_) {
      edge = BandEdge{a.edge_->omega, f(a.edge_->left, b.edge_->left),
                      f(a.edge_->right, b.edge_->right)};
    }
    return AmplitudeResponse(a.grid_, std::move(out), edge);
  }

  bool same_layout(const AmplitudeResponse& other) const;
  void require_same_layout(const AmplitudeResponse& other) const;

 private:
  FrequencyGrid grid_;
  std::vector<double> values_;
  std::optional<BandEdge> edge_;
  std::size_t last_in_band_;
};

/// (1/pi) * integral over [0, pi] of f(value, omega), i.e. the normalized
/// integral over [-pi, pi] of an even integrand. Composite trapezoid; a band
/// edge is treated as a doubled node carrying the left and right limits.
template <class F>
double spectral_mean(const AmplitudeResponse& p, F&& f) {
  const FrequencyGrid& grid = p.grid();
  const auto& v = p.values();
  const std::size_t n = v.size();
  const std::size_t last = p.last_in_band();

  double sum = 0.0;
  double prev = f(v[0], 0.0);
  double prev_omega = 0.0;
  auto segment = [&](double omega, double value) {
    sum += 0.5 * (omega - prev_omega) * (prev + value);
    prev = value;
    prev_omega = omega;
  };

  for (std::size_t i = 1; i <= last; ++i) {
    const double w = grid.omega(i);
    segment(w, f(v[i], w));
  }
  if (const auto& edge = p.edge()) {
    segment(edge->omega, f(edge->left, edge->omega));
    prev = f(edge->right, edge->omega);
    for (std::size_t i = last + 1; i < n; ++i) {
      const double w = grid.omega(i);
      segment(w, f(v[i], w));
    }
  }
  return sum / std::numbers::pi;
}

/// Overload for integrands that depend on the sample value only.
template <class F>
  requires std::is_invocable_r_v<double, F, double>
double spectral_mean(const AmplitudeResponse& p, F&& f) {
  return spectral_mean(p, [&](double value, double) { return f(value); });
}

/// Continuous-time transfer function N(s)/D(s), coefficients in descending
/// powers of s, together with the Nyquist sampling period T_s.
class ContinuousTF {
 public:
  ContinuousTF(std::vector<double> num, std::vector<double> den, double sample_period);

  const std::vector<double>& num() const { return num_; }
  const std::vector<double>& den() const { return den_; }
  double sample_period() const { return sample_period_; }
  std::size_t order() const { return den_.size() - 1; }

  std::complex<double> evaluate(std::complex<double> s) const;

 private:
  std::vector<double> num_;
  std::vector<double> den_;
  double sample_period_;
};

/// Discrete-time transfer function in powers of z^-1 (ascending delay).
/// The denominator is normalized so that den[0] == 1.
class RationalDiscreteTF {
 public:
  static constexpr double kStabilityMargin = 1e-9;

  RationalDiscreteTF(std::vector<double> num, std::vector<double> den = {1.0});

  const std::vector<double>& num() const { return num_; }
  const std::vector<double>& den() const { return den_; }

  /// H(e^{j omega}).
  std::complex<double> frequency_response(double omega) const;

  std::vector<std::complex<double>> poles() const;
  double max_pole_magnitude() const;
  bool is_stable() const;
  /// Throws DomainError naming `what` if a pole lies on or outside 1 - 1e-9.
  void require_stable(const char* what) const;
  bool is_fir() const { return den_.size() == 1; }

  bool operator==(const RationalDiscreteTF&) const = default;

 private:
  std::vector<double> num_;
  std::vector<double> den_;
};

/// Squared L2 norm (1/2pi) int |p|^2.
double l2_norm_sq(const AmplitudeResponse& p);

/// (1/2pi) int ln p. Throws DomainError on a nonpositive sample.
double log_geometric_mean(const AmplitudeResponse& p);

/// |H(e^{j omega})| on the grid.
AmplitudeResponse amplitude_of_tf(const RationalDiscreteTF& h, const FrequencyGrid& grid);

/// |H| sampled on the same nodes as `layout`, including its band edge.
AmplitudeResponse amplitude_of_tf(const RationalDiscreteTF& h, const AmplitudeResponse& layout);

/// |P(j lambda omega / T_s)| for omega <= pi/lambda and zero above, i.e. the
/// response of the plant seen through ideal D/C conversion at period T_s/lambda.
AmplitudeResponse ct_frequency_map(const ContinuousTF& plant, int lambda, const FrequencyGrid& grid);

/// p(lambda omega) on [0, pi/lambda], zero above. Same grid as the input.
AmplitudeResponse oversample_response(const AmplitudeResponse& p, int lambda);

/// Normalized weighted deviation int |psi - mean psi| psi / int psi^2 < tol.
bool is_almost_constant(const AmplitudeResponse& p, double tol);

}  // namespace efq
