#include "efq/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "efq/design.hpp"
#include "efq/polynomial.hpp"

namespace efq {

namespace {

constexpr double kTailFraction = 1e-14;
constexpr double kMaxCondition = 1e13;
constexpr double kSnapRadius = 1.0 - 1e-8;
constexpr double kUnitBand = 1e-6;
constexpr int kSecularIterations = 400;

double dot(const std::vector<double>& a, std::size_t a_off, const std::vector<double>& b,
           std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += a[a_off + i] * b[i];
  return acc;
}

std::complex<double> eval_delay_poly(const std::vector<double>& coeffs, double omega) {
  const std::complex<double> z_inv = std::polar(1.0, -omega);
  std::complex<double> acc(0.0, 0.0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z_inv + *it;
  return acc;
}

// Picks the minimum-phase half of the roots of a symmetric Laurent
// polynomial. Roots come in pairs (z, 1/conj z); pairs on the unit circle
// show up as near-duplicates and one of each is kept.
std::vector<std::complex<double>> minimum_phase_half(std::vector<std::complex<double>> roots,
                                                     std::size_t half) {
  std::vector<std::complex<double>> inside;
  std::vector<std::complex<double>> near;
  for (const auto& r : roots) {
    const double mag = std::abs(r);
    if (mag < 1.0 - kUnitBand) {
      inside.push_back(r);
    } else if (mag <= 1.0 + kUnitBand) {
      near.push_back(r);
    }
  }
  std::sort(near.begin(), near.end(),
            [](const auto& a, const auto& b) { return std::arg(a) < std::arg(b); });
  for (std::size_t i = 0; i < near.size(); i += 2) inside.push_back(near[i]);

  if (inside.size() != half) {
    std::sort(roots.begin(), roots.end(),
              [](const auto& a, const auto& b) { return std::abs(a) < std::abs(b); });
    roots.resize(half);
    inside = std::move(roots);
  }
  for (auto& r : inside) {
    if (std::abs(r) > 1.0) r = 1.0 / std::conj(r);
    if (std::abs(r) > kSnapRadius) r *= kSnapRadius / std::abs(r);
  }
  return inside;
}

}  // namespace

double FitReport::loss_db() const { return to_db(achieved_mse / ideal_mse); }

std::vector<double> impulse_response(const RationalDiscreteTF& filter, std::size_t length) {
  const auto& b = filter.num();
  const auto& a = filter.den();
  std::vector<double> h(length, 0.0);
  for (std::size_t n = 0; n < length; ++n) {
    double acc = n < b.size() ? b[n] : 0.0;
    for (std::size_t k = 1; k < a.size() && k <= n; ++k) acc -= a[k] * h[n - k];
    h[n] = acc;
  }
  return h;
}

std::vector<double> impulse_response_truncated(const RationalDiscreteTF& filter) {
  if (filter.is_fir()) return filter.num();
  filter.require_stable("filter");

  const double rho = filter.max_pole_magnitude();
  const double growth = rho * rho / (1.0 - rho * rho);
  const std::size_t window = filter.den().size() - 1;
  const std::size_t settle = filter.num().size() + window;

  const auto& b = filter.num();
  const auto& a = filter.den();
  std::vector<double> h;
  h.reserve(256);
  double energy = 0.0;
  for (std::size_t n = 0; n < kMaxImpulseLength; ++n) {
    double acc = n < b.size() ? b[n] : 0.0;
    for (std::size_t k = 1; k < a.size() && k <= n; ++k) acc -= a[k] * h[n - k];
    h.push_back(acc);
    energy += acc * acc;
    if (n + 1 < settle) continue;
    double recent = 0.0;
    for (std::size_t k = 0; k < window; ++k) recent += h[n - k] * h[n - k];
    // Each of the `window` modes decays at least as fast as rho^n.
    if (recent * growth * static_cast<double>(window) <= kTailFraction * energy) break;
  }
  return h;
}

RationalDiscreteTF normalize_head(const RationalDiscreteTF& filter) {
  const double head = filter.num().front() / filter.den().front();
  if (head == 0.0 || !std::isfinite(head)) {
    throw DegenerateFilterError("impulse response head is zero; cannot normalize");
  }
  if (head == 1.0) return filter;
  std::vector<double> num = filter.num();
  for (double& c : num) c /= head;
  num.front() = 1.0;
  return RationalDiscreteTF(std::move(num), filter.den());
}

std::vector<double> levinson_durbin(const std::vector<double>& autocorr, std::size_t order,
                                    std::vector<double>* reflection) {
  if (autocorr.size() < order + 1) throw ParameterError("too few autocorrelation lags");
  if (!(autocorr[0] > 0.0)) throw NumericalError("Levinson recursion: zero-lag power is not positive");

  std::vector<double> a{1.0};
  a.reserve(order + 1);
  double error = autocorr[0];
  if (reflection) reflection->clear();
  for (std::size_t m = 1; m <= order; ++m) {
    double acc = autocorr[m];
    for (std::size_t i = 1; i < m; ++i) acc += a[i] * autocorr[m - i];
    const double k = -acc / error;
    std::vector<double> next(m + 1);
    next[0] = 1.0;
    for (std::size_t i = 1; i < m; ++i) next[i] = a[i] + k * a[m - i];
    next[m] = k;
    a = std::move(next);
    error *= (1.0 - k * k);
    if (reflection) reflection->push_back(k);
    if (!(error > 0.0)) {
      std::ostringstream msg;
      msg << "Levinson recursion broke down at order " << m << " (prediction error " << error
          << ")";
      throw NumericalError(msg.str());
    }
  }
  return a;
}

std::vector<double> autocorrelation_of(const AmplitudeResponse& amplitude, std::size_t max_lag) {
  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    const double kk = static_cast<double>(k);
    out[k] = spectral_mean(amplitude, [kk](double v, double w) { return v * v * std::cos(kk * w); });
  }
  return out;
}

namespace {

constexpr int kYuleWalkerRefinements = 50;

// Levinson denominator for the power spectrum amplitude^2.
std::vector<double> ar_part(const AmplitudeResponse& amplitude, std::size_t order) {
  std::vector<double> reflection;
  std::vector<double> den = levinson_durbin(autocorrelation_of(amplitude, order), order, &reflection);
  for (double k : reflection) {
    if (!(std::abs(k) < 1.0)) throw NumericalError("Levinson reflection coefficient outside (-1, 1)");
  }
  return den;
}

// Minimum-phase numerator whose squared magnitude matches the first
// order + 1 lags of the residual spectrum target^2 |den|^2.
std::vector<double> ma_part(const AmplitudeResponse& target, const std::vector<double>& den,
                            std::size_t order) {
  std::vector<double> c(order + 1);
  for (std::size_t k = 0; k <= order; ++k) {
    const double kk = static_cast<double>(k);
    c[k] = spectral_mean(target, [&den, kk](double value, double w) {
      return value * value * std::norm(eval_delay_poly(den, w)) * std::cos(kk * w);
    });
  }
  if (!(c[0] > 0.0)) throw NumericalError("residual spectrum has no power");

  std::size_t q = order;
  while (q > 0 && std::abs(c[q]) <= 1e-13 * c[0]) --q;

  std::vector<double> monic{1.0};
  if (q > 0) {
    std::vector<double> laurent(2 * q + 1);
    for (std::size_t k = 0; k <= q; ++k) {
      laurent[q - k] = c[k];
      laurent[q + k] = c[k];
    }
    monic = poly::from_roots(minimum_phase_half(poly::roots(laurent), q));
  }
  const double monic_energy = std::inner_product(monic.begin(), monic.end(), monic.begin(), 0.0);
  const double gain = std::sqrt(c[0] / monic_energy);
  std::vector<double> num(order + 1, 0.0);
  for (std::size_t i = 0; i < monic.size(); ++i) num[i] = gain * monic[i];
  return num;
}

// target / |num| on the grid, or nothing when num nearly vanishes somewhere.
std::optional<AmplitudeResponse> whiten(const AmplitudeResponse& target,
                                        const std::vector<double>& num) {
  const FrequencyGrid& grid = target.grid();
  const double scale = std::sqrt(std::inner_product(num.begin(), num.end(), num.begin(), 0.0));
  std::vector<double> out(target.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = std::abs(eval_delay_poly(num, grid.omega(i)));
    if (!(m > 1e-6 * scale)) return std::nullopt;
    out[i] = target[i] / m;
  }
  std::optional<BandEdge> edge;
  if (const auto& e = target.edge()) {
    const double m = std::abs(eval_delay_poly(num, e->omega));
    if (!(m > 1e-6 * scale)) return std::nullopt;
    edge = BandEdge{e->omega, e->left / m, e->right / m};
  }
  return AmplitudeResponse(grid, std::move(out), edge);
}

double magnitude_rms(const AmplitudeResponse& target, const std::vector<double>& num,
                     const std::vector<double>& den) {
  const FrequencyGrid& grid = target.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double w = grid.omega(i);
    const double diff = std::abs(eval_delay_poly(num, w)) / std::abs(eval_delay_poly(den, w)) - target[i];
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(target.size()));
}

// Least-squares solution of the autocorrelation recursion at lags beyond the
// numerator order. Exact for rational targets of at most this order, unlike
// the Toeplitz equations. Unstable poles are reflected into the unit disk,
// which leaves the magnitude shape unchanged.
std::optional<std::vector<double>> extended_ar_part(const AmplitudeResponse& target,
                                                    std::size_t order) {
  const std::size_t rows = 4 * order;
  const std::vector<double> r = autocorrelation_of(target, order + rows);
  Eigen::MatrixXd a(rows, order);
  Eigen::VectorXd b(rows);
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t lag = order + 1 + k;
    for (std::size_t i = 1; i <= order; ++i) a(k, i - 1) = r[lag - i];
    b(k) = -r[lag];
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  std::vector<double> den(order + 1, 1.0);
  for (std::size_t i = 0; i < order; ++i) {
    if (!std::isfinite(x(i))) return std::nullopt;
    den[i + 1] = x(i);
  }
  auto poles = poly::roots(den);
  for (auto& z : poles) {
    const double m = std::abs(z);
    if (m > 1.0) z = 1.0 / std::conj(z);
    if (!(std::abs(z) < 1.0 - RationalDiscreteTF::kStabilityMargin)) return std::nullopt;
  }
  return poly::from_roots(poles);
}

struct ArmaFit {
  std::vector<double> num;
  std::vector<double> den;
  double rms;
};

// Numerator for the given poles, then alternate pole and zero refits while
// the magnitude error keeps falling.
ArmaFit refine_arma(const AmplitudeResponse& target, std::vector<double> den, std::size_t order) {
  std::vector<double> num = ma_part(target, den, order);
  ArmaFit best{num, den, magnitude_rms(target, num, den)};
  for (int iter = 0; iter < kYuleWalkerRefinements; ++iter) {
    const auto whitened = whiten(target, num);
    if (!whitened) break;
    try {
      den = ar_part(*whitened, order);
      num = ma_part(target, den, order);
    } catch (const NumericalError&) {
      break;
    }
    const double rms = magnitude_rms(target, num, den);
    if (!(rms < best.rms * (1.0 - 1e-9))) break;
    best = {num, den, rms};
  }
  return best;
}

}  // namespace

RationalDiscreteTF yule_walker_fit(const AmplitudeResponse& target, std::size_t order) {
  if (order < 1) throw ParameterError("Yule-Walker order must be at least 1");
  if (order > target.size() / 4) {
    throw ParameterError("Yule-Walker order " + std::to_string(order) +
                         " exceeds a quarter of the grid size");
  }
  const auto& v = target.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      throw DomainError("Yule-Walker target must be positive (index " + std::to_string(i) + ")");
    }
  }
  if (target.edge() && !(target.edge()->left > 0.0 && target.edge()->right > 0.0)) {
    throw DomainError("Yule-Walker target must be positive at the band edge");
  }

  // The Toeplitz poles are biased whenever the target has zeros; the refit
  // loop and the extended equations both correct for that.
  ArmaFit best = refine_arma(target, ar_part(target, order), order);
  if (const auto den = extended_ar_part(target, order)) {
    try {
      ArmaFit alt = refine_arma(target, *den, order);
      if (alt.rms < best.rms) best = std::move(alt);
    } catch (const NumericalError&) {
    }
  }

  RationalDiscreteTF fitted(std::move(best.num), std::move(best.den));
  if (!fitted.is_stable()) throw NumericalError("Yule-Walker denominator is not stable");
  return normalize_head(fitted);
}

FirFit norm_constrained_fir_from_autocorr(const std::vector<double>& autocorr, std::size_t order,
                                          double norm_budget) {
  if (order < 1) throw ParameterError("FIR order must be at least 1");
  if (autocorr.size() < order + 1) throw ParameterError("too few autocorrelation lags");
  if (!(norm_budget >= 1.0) || !std::isfinite(norm_budget)) {
    throw ParameterError("norm budget must be at least 1 (the head tap alone has norm 1)");
  }
  const auto m = static_cast<Eigen::Index>(order);
  Eigen::MatrixXd gram(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = autocorr[static_cast<std::size_t>(i + 1)];
    for (Eigen::Index j = 0; j < m; ++j) gram(i, j) = autocorr[static_cast<std::size_t>(std::abs(i - j))];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lambdas = eig.eigenvalues();
  const double lmin = lambdas.minCoeff();
  const double lmax = lambdas.maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > kMaxCondition) {
    std::ostringstream msg;
    msg << "Gram matrix is indefinite or ill-conditioned (condition estimate "
        << (lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity()) << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * b;
  auto solve = [&](double mu) -> Eigen::VectorXd {
    Eigen::VectorXd scaled = proj.array() / (lambdas.array() + mu);
    return -(eig.eigenvectors() * scaled);
  };

  const double radius_sq = norm_budget - 1.0;
  double mu = 0.0;
  Eigen::VectorXd x = solve(0.0);
  if (x.squaredNorm() > radius_sq) {
    if (radius_sq == 0.0) {
      mu = std::numeric_limits<double>::infinity();
      x.setZero();
    } else {
      // ||x(mu)|| <= ||b|| / mu, so this upper end is always feasible.
      double lo = 0.0;
      double hi = b.norm() / std::sqrt(radius_sq);
      for (int it = 0; it < kSecularIterations && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (solve(mid).squaredNorm() > radius_sq ? lo : hi) = mid;
      }
      mu = hi;
      x = solve(mu);
    }
  }

  const double mu_finite = std::isfinite(mu) ? mu : 0.0;
  const Eigen::VectorXd resid = gram * x + b + mu_finite * x;
  FirFit out;
  out.filter.taps.assign(order + 1, 0.0);
  out.filter.taps[0] = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) out.filter.taps[static_cast<std::size_t>(i + 1)] = x(i);
  out.objective = autocorr[0] + 2.0 * b.dot(x) + x.dot(gram * x);
  out.norm_sq = 1.0 + x.squaredNorm();
  out.kkt_multiplier = mu;
  out.stationarity_residual = std::isfinite(mu) ? resid.norm() : 0.0;
  out.gradient_norm = b.norm();
  out.slack = radius_sq - x.squaredNorm();
  return out;
}

FirFit norm_constrained_fir(const RationalDiscreteTF& plant, std::size_t order,
                            double norm_budget) {
  plant.require_stable("plant");
  const std::vector<double> g = impulse_response_truncated(plant);
  std::vector<double> autocorr(order + 1, 0.0);
  for (std::size_t k = 0; k <= order && k < g.size(); ++k) {
    autocorr[k] = dot(g, k, g, g.size() - k);
  }
  return norm_constrained_fir_from_autocorr(autocorr, order, norm_budget);
}

FirFit norm_constrained_fir(const AmplitudeResponse& plant, std::size_t order,
                            double norm_budget) {
  return norm_constrained_fir_from_autocorr(autocorrelation_of(plant, order), order, norm_budget);
}

FitReport evaluate_fit(const RationalDiscreteTF& fit, const AmplitudeResponse& p, double gamma,
                       double ideal_mse, std::string method) {
  fit.require_stable("shaping filter");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  const AmplitudeResponse r = amplitude_of_tf(fit, p);
  const double norm_sq = l2_norm_sq(r);
  const double nu = gamma + 1.0;
  const bool feasible = norm_sq < nu;
  const double shaped =
      l2_norm_sq(AmplitudeResponse::combine(p, r, [](double a, double b) { return a * b; }));
  const double achieved =
      feasible ? shaped / (nu - norm_sq) : std::numeric_limits<double>::infinity();
  return FitReport{fit, std::move(method), achieved, ideal_mse, norm_sq, feasible, 0.0};
}

}  // namespace efq
