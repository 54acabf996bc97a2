#include "efq/spectral.hpp"

#include <algorithm>
#include <sstream>
#include <string>

#include "efq/polynomial.hpp"

namespace efq {

namespace {

constexpr double kPi = std::numbers::pi;

// Node positions within this distance of an edge are treated as on it.
constexpr double kEdgeSnap = 1e-12;

std::complex<double> eval_delay_poly(const std::vector<double>& coeffs,
                                     std::complex<double> z_inv) {
  std::complex<double> acc(0.0, 0.0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z_inv + *it;
  return acc;
}

}  // namespace

FrequencyGrid::FrequencyGrid(std::size_t n_points) : n_points_(n_points), spacing_(0.0) {
  if (n_points < kMinPoints) {
    throw ParameterError("frequency grid needs at least " + std::to_string(kMinPoints) +
                         " points, got " + std::to_string(n_points));
  }
  spacing_ = kPi / static_cast<double>(n_points - 1);
}

std::vector<double> FrequencyGrid::omegas() const {
  std::vector<double> out(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) out[i] = omega(i);
  return out;
}

AmplitudeResponse::AmplitudeResponse(FrequencyGrid grid, std::vector<double> values,
                                     std::optional<BandEdge> edge)
    : grid_(grid), values_(std::move(values)), edge_(edge), last_in_band_(0) {
  if (values_.size() != grid_.size()) {
    throw ParameterError("amplitude response has " + std::to_string(values_.size()) +
                         " samples for a grid of " + std::to_string(grid_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
      std::ostringstream msg;
      msg << "amplitude sample " << i << " is not a finite nonnegative value (" << values_[i]
          << ")";
      throw DomainError(msg.str());
    }
  }
  last_in_band_ = values_.size() - 1;
  if (edge_) {
    if (!(edge_->omega > 0.0 && edge_->omega < kPi)) {
      throw DomainError("band edge must lie strictly inside (0, pi)");
    }
    if (!(edge_->left >= 0.0 && edge_->right >= 0.0) || !std::isfinite(edge_->left) ||
        !std::isfinite(edge_->right)) {
      throw DomainError("band edge limits must be finite and nonnegative");
    }
    const double pos = edge_->omega / grid_.spacing();
    last_in_band_ = static_cast<std::size_t>(std::floor(pos + kEdgeSnap));
    last_in_band_ = std::min(last_in_band_, values_.size() - 1);
  }
}

AmplitudeResponse AmplitudeResponse::constant(FrequencyGrid grid, double value) {
  return AmplitudeResponse(grid, std::vector<double>(grid.size(), value));
}

bool AmplitudeResponse::same_layout(const AmplitudeResponse& other) const {
  if (!(grid_ == other.grid_)) return false;
  if (edge_.has_value() != other.edge_.has_value()) return false;
  return !edge_ || edge_->omega == other.edge_->omega;
}

void AmplitudeResponse::require_same_layout(const AmplitudeResponse& other) const {
  if (!same_layout(other)) {
    throw ParameterError("amplitude responses are sampled on different grids or band edges");
  }
}

ContinuousTF::ContinuousTF(std::vector<double> num, std::vector<double> den,
                           double sample_period)
    : num_(std::move(num)), den_(std::move(den)), sample_period_(sample_period) {
  auto strip = [](std::vector<double>& c) {
    auto first = std::find_if(c.begin(), c.end(), [](double x) { return x != 0.0; });
    c.erase(c.begin(), first);
  };
  strip(num_);
  strip(den_);
  if (den_.empty()) throw DomainError("continuous-time denominator is zero");
  if (num_.empty()) num_ = {0.0};
  if (num_.size() > den_.size()) {
    throw DomainError("continuous-time transfer function is improper");
  }
  if (!(sample_period_ > 0.0) || !std::isfinite(sample_period_)) {
    throw DomainError("sampling period must be positive");
  }
  for (const auto& root : poly::roots(den_)) {
    if (!(root.real() < 0.0)) {
      std::ostringstream msg;
      msg << "continuous-time plant is unstable: pole at " << root;
      throw DomainError(msg.str());
    }
  }
}

std::complex<double> ContinuousTF::evaluate(std::complex<double> s) const {
  return poly::evaluate(num_, s) / poly::evaluate(den_, s);
}

RationalDiscreteTF::RationalDiscreteTF(std::vector<double> num, std::vector<double> den)
    : num_(std::move(num)), den_(std::move(den)) {
  if (num_.empty()) num_ = {0.0};
  while (den_.size() > 1 && den_.back() == 0.0) den_.pop_back();
  if (den_.empty() || den_.front() == 0.0) {
    throw DomainError("discrete-time denominator must start with a nonzero coefficient");
  }
  const double lead = den_.front();
  if (lead != 1.0) {
    for (double& c : num_) c /= lead;
    for (double& c : den_) c /= lead;
  }
}

std::complex<double> RationalDiscreteTF::frequency_response(double omega) const {
  const std::complex<double> z_inv = std::polar(1.0, -omega);
  return eval_delay_poly(num_, z_inv) / eval_delay_poly(den_, z_inv);
}

std::vector<std::complex<double>> RationalDiscreteTF::poles() const {
  // 1 + a1 z^-1 + ... + aN z^-N has the roots of z^N + a1 z^(N-1) + ... + aN.
  return poly::roots(den_);
}

double RationalDiscreteTF::max_pole_magnitude() const { return poly::max_root_magnitude(den_); }

bool RationalDiscreteTF::is_stable() const {
  return max_pole_magnitude() < 1.0 - kStabilityMargin;
}

void RationalDiscreteTF::require_stable(const char* what) const {
  const double radius = max_pole_magnitude();
  if (!(radius < 1.0 - kStabilityMargin)) {
    std::ostringstream msg;
    msg << what << " is not stable (largest pole magnitude " << radius << ")";
    throw DomainError(msg.str());
  }
}

double l2_norm_sq(const AmplitudeResponse& p) {
  return spectral_mean(p, [](double v) { return v * v; });
}

double log_geometric_mean(const AmplitudeResponse& p) {
  const auto& v = p.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      throw DomainError("log of nonpositive amplitude at grid index " + std::to_string(i));
    }
  }
  if (const auto& edge = p.edge(); edge && !(edge->left > 0.0 && edge->right > 0.0)) {
    throw DomainError("log of nonpositive amplitude at the band edge");
  }
  return spectral_mean(p, [](double v) { return std::log(v); });
}

AmplitudeResponse amplitude_of_tf(const RationalDiscreteTF& h, const FrequencyGrid& grid) {
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = std::abs(h.frequency_response(grid.omega(i)));
  }
  return AmplitudeResponse(grid, std::move(values));
}

AmplitudeResponse amplitude_of_tf(const RationalDiscreteTF& h, const AmplitudeResponse& layout) {
  AmplitudeResponse on_grid = amplitude_of_tf(h, layout.grid());
  if (!layout.edge()) return on_grid;
  const double at_edge = std::abs(h.frequency_response(layout.edge()->omega));
  return AmplitudeResponse(layout.grid(), on_grid.values(),
                           BandEdge{layout.edge()->omega, at_edge, at_edge});
}

AmplitudeResponse ct_frequency_map(const ContinuousTF& plant, int lambda,
                                   const FrequencyGrid& grid) {
  if (lambda < 1) throw DomainError("oversampling ratio must be at least 1");
  const double ts = plant.sample_period();
  const double cutoff = kPi / lambda;
  auto magnitude = [&](double omega) {
    return std::abs(plant.evaluate({0.0, lambda * omega / ts}));
  };

  std::vector<double> values(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid.omega(i);
    if (lambda == 1 || w <= cutoff + kEdgeSnap * grid.spacing()) values[i] = magnitude(w);
  }
  if (lambda == 1) return AmplitudeResponse(grid, std::move(values));
  return AmplitudeResponse(grid, std::move(values), BandEdge{cutoff, magnitude(cutoff), 0.0});
}

AmplitudeResponse oversample_response(const AmplitudeResponse& p, int lambda) {
  if (lambda < 1) throw DomainError("oversampling ratio must be at least 1");
  if (p.edge()) {
    throw DomainError("oversample_response expects a response defined on all of [0, pi]");
  }
  if (lambda == 1) return p;

  const FrequencyGrid& grid = p.grid();
  const auto& in = p.values();
  const std::size_t n = in.size();
  std::vector<double> out(n, 0.0);
  // Source position lambda*i is an integer node index; the interpolation
  // weight below is zero except for round-off.
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(lambda) * static_cast<double>(i);
    if (pos > static_cast<double>(n - 1)) break;
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    out[i] = lo + 1 < n ? (1.0 - frac) * in[lo] + frac * in[lo + 1] : in[lo];
  }
  return AmplitudeResponse(grid, std::move(out), BandEdge{kPi / lambda, in[n - 1], 0.0});
}

bool is_almost_constant(const AmplitudeResponse& p, double tol) {
  if (!(tol > 0.0)) throw DomainError("almost-constant tolerance must be positive");
  const double energy = spectral_mean(p, [](double v) { return v * v; });
  if (energy == 0.0) return true;
  const double mean = spectral_mean(p, [](double v) { return v; });
  const double deviation =
      spectral_mean(p, [mean](double v) { return std::abs(v - mean) * v; });
  return deviation / energy < tol;
}

}  // namespace efq
