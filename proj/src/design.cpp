#include "efq/design.hpp"

#include <cmath>
#include <sstream>

#include "efq/parallel.hpp"

namespace efq {

namespace {

constexpr double kBracketLow = 1e-12;
constexpr double kBracketHigh = 1.0;
constexpr int kMaxBracketSteps = 200;
constexpr double kRelativeWidth = 1e-12;
constexpr double kRootTolerance = 1e-10;

void require_positive_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    std::ostringstream msg;
    msg << "alpha must be positive and finite, got " << alpha;
    throw DomainError(msg.str());
  }
}

double theta_sq(double alpha, const AmplitudeResponse& p) {
  const double t = theta(alpha, p);
  return t * t;
}

}  // namespace

DesignProblem::DesignProblem(AmplitudeResponse p, double gamma)
    : p_(std::move(p)), gamma_(gamma) {
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
    std::ostringstream msg;
    msg << "nu = gamma + 1 must exceed 1 (gamma = " << gamma_ << ")";
    throw DomainError(msg.str());
  }
  if (!(l2_norm_sq(p_) > 0.0)) throw DomainError("plant amplitude is identically zero");
}

QuantizerSpec QuantizerSpec::from_input_std(int bits, double loading_factor, double sigma_u) {
  const double gamma = gamma_from_bits(bits, loading_factor);
  if (!(sigma_u > 0.0) || !std::isfinite(sigma_u)) {
    throw DomainError("quantizer input standard deviation must be positive");
  }
  const double saturation = loading_factor * sigma_u;
  const double levels_minus_one = std::ldexp(1.0, bits) - 1.0;
  return QuantizerSpec{bits, loading_factor, 2.0 * saturation / levels_minus_one, saturation,
                       gamma};
}

double theta(double alpha, const AmplitudeResponse& p) {
  require_positive_alpha(alpha);
  return std::exp(0.5 * spectral_mean(p, [alpha](double v) { return std::log(v * v + alpha); }));
}

double capital_N(double alpha, const AmplitudeResponse& p) {
  const double t2 = theta_sq(alpha, p);
  return t2 * spectral_mean(p, [alpha](double v) { return v * v / (v * v + alpha); });
}

double capital_C(double alpha, const AmplitudeResponse& p) {
  const double t2 = theta_sq(alpha, p);
  return t2 * spectral_mean(p, [alpha](double v) { return 1.0 / (v * v + alpha); });
}

double phi(double alpha, const DesignProblem& prob) {
  const double c = capital_C(alpha, prob.p());
  if (!(c < prob.nu())) {
    std::ostringstream msg;
    msg << "alpha = " << alpha << " is infeasible: C(alpha) = " << c << " >= nu = " << prob.nu();
    throw InfeasibleError(msg.str());
  }
  return capital_N(alpha, prob.p()) / (prob.nu() - c);
}

double log_theta_sq_over_alpha(double alpha, const AmplitudeResponse& p) {
  require_positive_alpha(alpha);
  return spectral_mean(p, [alpha](double v) { return std::log1p(v * v / alpha); });
}

AmplitudeResponse optimal_r(double alpha, const AmplitudeResponse& p) {
  const double t = theta(alpha, p);
  return p.map([t, alpha](double v) { return t / std::sqrt(v * v + alpha); });
}

OptimalDesign solve_alpha_opt(const DesignProblem& prob) {
  const AmplitudeResponse& p = prob.p();
  const double nu = prob.nu();

  if (is_almost_constant(p, kAlmostConstantTol)) {
    // theta^2/alpha = (c^2 + alpha)/alpha has the closed-form root c^2/gamma.
    const double c_sq = l2_norm_sq(p);
    const double alpha = c_sq / prob.gamma();
    return OptimalDesign{alpha,  theta(alpha, p), p.map([](double) { return 1.0; }),
                         alpha,  1.0,             c_sq,
                         true};
  }

  const double log_nu = std::log(nu);
  auto excess = [&](double alpha) { return log_theta_sq_over_alpha(alpha, p) - log_nu; };

  double lo = kBracketLow;
  double hi = kBracketHigh;
  for (int k = 0; excess(hi) >= 0.0; ++k) {
    if (k == kMaxBracketSteps) throw NumericalError("could not bracket alpha_opt from above");
    hi *= 2.0;
  }
  for (int k = 0; excess(lo) <= 0.0; ++k) {
    if (k == kMaxBracketSteps) throw NumericalError("could not bracket alpha_opt from below");
    lo *= 0.5;
  }
  while (hi / lo - 1.0 > kRelativeWidth) {
    const double mid = std::sqrt(lo * hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  const double alpha = std::sqrt(lo * hi);

  const double t = theta(alpha, p);
  const double residual = std::abs(t * t / alpha - nu);
  if (!(residual <= kRootTolerance * nu)) {
    std::ostringstream msg;
    msg << "alpha_opt root residual " << residual / nu << " exceeds " << kRootTolerance;
    throw NumericalError(msg.str());
  }

  OptimalDesign design{alpha,
                       t,
                       p.map([t, alpha](double v) { return t / std::sqrt(v * v + alpha); }),
                       alpha,
                       capital_C(alpha, p),
                       capital_N(alpha, p),
                       false};
  if (!(design.norm_r_sq < nu)) {
    std::ostringstream msg;
    msg << "optimal design violates ||r||^2 < nu (" << design.norm_r_sq << " vs " << nu << ")";
    throw NumericalError(msg.str());
  }
  return design;
}

double gamma_from_bits(int bits, double loading_factor) {
  if (bits < 1 || bits > 52) throw DomainError("bits must lie in [1, 52]");
  if (!(loading_factor > 0.0) || !std::isfinite(loading_factor)) {
    throw DomainError("loading factor must be positive");
  }
  const double levels_minus_one = std::ldexp(1.0, bits) - 1.0;
  return 3.0 * levels_minus_one * levels_minus_one / (loading_factor * loading_factor);
}

double predicted_sigma_w_sq(double norm_r_sq, double nu, double sigma_x_sq) {
  if (!(norm_r_sq < nu)) {
    std::ostringstream msg;
    msg << "infeasible shaping filter: ||R||^2 = " << norm_r_sq << " >= nu = " << nu;
    throw InfeasibleError(msg.str());
  }
  return sigma_x_sq / (nu - norm_r_sq);
}

double predicted_sigma_w_sq(const OptimalDesign& design, double sigma_x_sq,
                            const DesignProblem& prob) {
  return predicted_sigma_w_sq(design.norm_r_sq, prob.nu(), sigma_x_sq);
}

double predicted_sigma_u_sq(double norm_r_sq, double nu, double sigma_x_sq) {
  return sigma_x_sq + (norm_r_sq - 1.0) * predicted_sigma_w_sq(norm_r_sq, nu, sigma_x_sq);
}

double predicted_output_mse(const AmplitudeResponse& r, const AmplitudeResponse& p,
                            double gamma, double sigma_x_sq) {
  const double nu = gamma + 1.0;
  const double sigma_w_sq = predicted_sigma_w_sq(l2_norm_sq(r), nu, sigma_x_sq);
  const AmplitudeResponse pr =
      AmplitudeResponse::combine(p, r, [](double a, double b) { return a * b; });
  return l2_norm_sq(pr) * sigma_w_sq;
}

double predicted_output_mse(const OptimalDesign& design, const AmplitudeResponse& p,
                            double gamma, double sigma_x_sq) {
  return predicted_output_mse(design.r_opt, p, gamma, sigma_x_sq);
}

RdPoint rd_point(const AmplitudeResponse& p_base, int lambda, int bits, double loading_factor) {
  const double gamma = gamma_from_bits(bits, loading_factor);
  const DesignProblem prob(oversample_response(p_base, lambda), gamma);
  const OptimalDesign design = solve_alpha_opt(prob);
  return RdPoint{design.distortion, design.alpha_opt, gamma, prob.nu()};
}

double upper_bound(double nu, int lambda, const AmplitudeResponse& p_base) {
  if (!(nu > 1.0)) throw DomainError("upper bound needs nu > 1");
  if (lambda < 1) throw DomainError("oversampling ratio must be at least 1");
  return l2_norm_sq(p_base) / (std::pow(nu, lambda) - 1.0);
}

std::vector<RdRow> rd_curve(const AmplitudeResponse& p_base, const std::vector<int>& bits_list,
                            const std::vector<int>& lambda_list, double loading_factor,
                            std::size_t workers) {
  if (bits_list.empty() || lambda_list.empty()) {
    throw ParameterError("rate-distortion sweep needs at least one bit count and one ratio");
  }
  std::vector<RdRow> rows(bits_list.size() * lambda_list.size());
  parallel_for(rows.size(), workers, [&](std::size_t idx) {
    const int bits = bits_list[idx / lambda_list.size()];
    const int lambda = lambda_list[idx % lambda_list.size()];
    const double gamma = gamma_from_bits(bits, loading_factor);
    const AmplitudeResponse p_lambda = oversample_response(p_base, lambda);
    const DesignProblem prob(p_lambda, gamma);
    const OptimalDesign design = solve_alpha_opt(prob);

    const double nu_pow = std::pow(prob.nu(), lambda);
    const double d_equiv =
        lambda == 1 ? design.distortion
                    : solve_alpha_opt(DesignProblem(p_base, nu_pow - 1.0)).distortion;
    const double t = design.theta_opt;

    rows[idx] = RdRow{bits,
                      lambda,
                      gamma,
                      design.distortion,
                      l2_norm_sq(p_lambda) / gamma,
                      upper_bound(prob.nu(), lambda, p_base),
                      std::abs(design.distortion - d_equiv) / design.distortion,
                      std::abs(t * t / design.alpha_opt - prob.nu()) / prob.nu()};
  });
  return rows;
}

double to_db(double power) { return 10.0 * std::log10(power); }

}  // namespace efq
