#include "efq/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "efq/polynomial.hpp"

namespace efq {

namespace {

double sample_variance(const std::vector<double>& x, std::size_t begin = 0) {
  const std::size_t n = x.size() - begin;
  double mean = 0.0;
  for (std::size_t i = begin; i < x.size(); ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = begin; i < x.size(); ++i) acc += (x[i] - mean) * (x[i] - mean);
  return acc / static_cast<double>(n - 1);
}

}  // namespace

MidRiseQuantizer::MidRiseQuantizer(double step_, double saturation_)
    : step(step_), saturation(saturation_) {
  if (!(step > 0.0) || !(saturation > 0.0)) {
    throw DomainError("quantizer step and saturation must be positive");
  }
}

QuantizedSample quantize_midrise(double xi, const MidRiseQuantizer& q) {
  const double d = q.step;
  const double sat = q.saturation;
  if (xi > sat + 0.5 * d) return {sat, true};
  if (xi < -sat - 0.5 * d) return {-sat, true};
  const double level = (std::floor(xi / d) + 0.5) * d;
  return {std::clamp(level, -sat, sat), false};
}

std::vector<double> gen_colored_input(const SignalModel& model, double sample_period) {
  if (model.kind != InputKind::colored) throw ParameterError("signal model is not colored");
  if (model.length < 2) throw ParameterError("input length must be at least 2");
  if (!(model.ct_pole > 0.0) || !(sample_period > 0.0) || !(model.variance > 0.0)) {
    throw DomainError("colored input needs positive pole, sample period and variance");
  }
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double pole = std::exp(-model.ct_pole * sample_period);

  std::vector<double> x(model.length);
  x[0] = gauss(rng) / std::sqrt(1.0 - pole * pole);
  for (std::size_t k = 1; k < x.size(); ++k) x[k] = pole * x[k - 1] + gauss(rng);

  const double scale = std::sqrt(model.variance / sample_variance(x));
  for (double& s : x) s *= scale;
  return x;
}

std::vector<double> gen_white_input(const SignalModel& model) {
  if (model.kind != InputKind::white) throw ParameterError("signal model is not white");
  if (!(model.variance > 0.0)) throw DomainError("input variance must be positive");
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(model.variance));
  std::vector<double> x(model.length);
  for (double& s : x) s = gauss(rng);
  return x;
}

LoopTraces run_feedback_loop(const std::vector<double>& x, const RationalDiscreteTF& r,
                             const MidRiseQuantizer& q) {
  r.require_stable("shaping filter");
  if (std::abs(r.num().front() - 1.0) > 1e-12) {
    throw ParameterError("shaping filter must have a unity impulse-response head");
  }

  // R - 1 = (B - A) / A has a zero leading numerator coefficient. Transposed
  // direct form II: the output at time k is the first state, which was built
  // from w_0..w_{k-1} only.
  const std::size_t len = std::max(r.num().size(), r.den().size());
  std::vector<double> c(len, 0.0);
  std::vector<double> a(len, 0.0);
  for (std::size_t i = 1; i < len; ++i) {
    c[i] = (i < r.num().size() ? r.num()[i] : 0.0) - (i < r.den().size() ? r.den()[i] : 0.0);
    a[i] = i < r.den().size() ? r.den()[i] : 0.0;
  }
  std::vector<double> state(len > 1 ? len - 1 : 0, 0.0);

  LoopTraces out;
  out.u.resize(x.size());
  out.v.resize(x.size());
  out.w.resize(x.size());
  out.overload.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double feedback = state.empty() ? 0.0 : state[0];
    const double u = x[k] + feedback;
    const QuantizedSample qs = quantize_midrise(u, q);
    const double w = qs.value - u;
    for (std::size_t i = 0; i + 1 < state.size(); ++i) {
      state[i] = c[i + 1] * w - a[i + 1] * feedback + state[i + 1];
    }
    if (!state.empty()) state.back() = c[len - 1] * w - a[len - 1] * feedback;

    out.u[k] = u;
    out.v[k] = qs.value;
    out.w[k] = w;
    out.overload[k] = qs.overloaded ? 1 : 0;
    out.overload_count += qs.overloaded ? 1 : 0;
  }
  return out;
}

std::vector<double> filter_signal(const RationalDiscreteTF& h, const std::vector<double>& x) {
  const auto& b = h.num();
  const auto& a = h.den();
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.size() && i <= n; ++i) acc += b[i] * x[n - i];
    for (std::size_t i = 1; i < a.size() && i <= n; ++i) acc -= a[i] * y[n - i];
    y[n] = acc;
  }
  return y;
}

RationalDiscreteTF discretize_plant(const ContinuousTF& plant, int lambda) {
  if (lambda < 1) throw DomainError("oversampling ratio must be at least 1");
  const double period = plant.sample_period() / lambda;
  const double k_scale = 2.0 / period;
  const std::size_t n = plant.order();

  // Ascending powers of s.
  std::vector<double> num_s(plant.num().rbegin(), plant.num().rend());
  std::vector<double> den_s(plant.den().rbegin(), plant.den().rend());
  num_s.resize(n + 1, 0.0);

  // s = K (1 - q) / (1 + q) with q = z^-1; multiply through by (1 + q)^n.
  std::vector<double> num_q(n + 1, 0.0);
  std::vector<double> den_q(n + 1, 0.0);
  const std::vector<double> minus{1.0, -1.0};
  const std::vector<double> plus{1.0, 1.0};
  for (std::size_t k = 0; k <= n; ++k) {
    std::vector<double> term{1.0};
    for (std::size_t i = 0; i < k; ++i) term = poly::multiply(term, minus);
    for (std::size_t i = k; i < n; ++i) term = poly::multiply(term, plus);
    const double scale = std::pow(k_scale, static_cast<double>(k));
    for (std::size_t i = 0; i <= n; ++i) {
      num_q[i] += num_s[k] * scale * term[i];
      den_q[i] += den_s[k] * scale * term[i];
    }
  }
  return RationalDiscreteTF(std::move(num_q), std::move(den_q));
}

std::size_t burn_in_length(const RationalDiscreteTF& plant) {
  std::size_t memory = plant.num().size();
  if (!plant.is_fir()) {
    const double rho = plant.max_pole_magnitude();
    memory = std::max(memory, static_cast<std::size_t>(std::ceil(1.0 / (1.0 - rho))));
  }
  return std::max<std::size_t>(1000, 20 * memory);
}

double empirical_mse(const std::vector<double>& v, const std::vector<double>& x,
                     const RationalDiscreteTF& plant) {
  if (v.size() != x.size()) throw ParameterError("v and x differ in length");
  const std::size_t burn = burn_in_length(plant);
  if (v.size() < burn + 2) {
    std::ostringstream msg;
    msg << "sequence of length " << v.size() << " is shorter than the burn-in of " << burn;
    throw ParameterError(msg.str());
  }
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = v[i] - x[i];
  return sample_variance(filter_signal(plant, e), burn);
}

std::vector<double> whiteness_stat(const std::vector<double>& w, std::size_t max_lag) {
  if (max_lag < 1) throw ParameterError("max_lag must be at least 1");
  if (w.size() <= max_lag + 1) throw ParameterError("sequence too short for requested lags");
  double mean = 0.0;
  for (double s : w) mean += s;
  mean /= static_cast<double>(w.size());
  double denom = 0.0;
  for (double s : w) denom += (s - mean) * (s - mean);
  std::vector<double> out(max_lag, 0.0);
  if (denom == 0.0) return out;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < w.size(); ++i) acc += (w[i] - mean) * (w[i + k] - mean);
    out[k - 1] = acc / denom;
  }
  return out;
}

SimulationResult simulate(const SimulationSetup& setup, LoopTraces* traces) {
  const FrequencyGrid grid(setup.grid_points);
  const RationalDiscreteTF& r = setup.shaping_filter;
  r.require_stable("shaping filter");
  setup.plant.require_stable("plant");

  const AmplitudeResponse p_amp = amplitude_of_tf(setup.plant, grid);
  const AmplitudeResponse r_amp = amplitude_of_tf(r, grid);
  const double gamma = gamma_from_bits(setup.bits, setup.loading_factor);
  const double nu = gamma + 1.0;
  const double sigma_x_sq = setup.input.variance;
  const double norm_r = l2_norm_sq(r_amp);
  const double sigma_u_pred = predicted_sigma_u_sq(norm_r, nu, sigma_x_sq);

  const std::vector<double> x = setup.input.kind == InputKind::colored
                                    ? gen_colored_input(setup.input, setup.sample_period)
                                    : gen_white_input(setup.input);

  QuantizerSpec spec = QuantizerSpec::from_input_std(setup.bits, setup.loading_factor,
                                                     std::sqrt(sigma_u_pred));
  LoopTraces loop = run_feedback_loop(x, r, MidRiseQuantizer(spec));
  if (setup.refine_step) {
    spec = QuantizerSpec::from_input_std(setup.bits, setup.loading_factor,
                                         std::sqrt(sample_variance(loop.u)));
    loop = run_feedback_loop(x, r, MidRiseQuantizer(spec));
  }

  SimulationResult result;
  result.seed = setup.input.seed;
  result.length = x.size();
  result.step = spec.step;
  result.empirical_mse = empirical_mse(loop.v, x, setup.plant);
  result.predicted_mse = predicted_output_mse(r_amp, p_amp, gamma, sigma_x_sq);
  result.overload_count = loop.overload_count;
  result.overload_rate =
      static_cast<double>(loop.overload_count) / static_cast<double>(x.size());
  result.w_variance = sample_variance(loop.w);
  result.w_autocorr.push_back(1.0);
  for (double c : whiteness_stat(loop.w, setup.autocorr_lags)) result.w_autocorr.push_back(c);
  result.sigma_u_sq = sample_variance(loop.u);
  result.predicted_sigma_u_sq = sigma_u_pred;

  const std::vector<double> shaped = filter_signal(r, loop.w);
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    worst = std::max(worst, std::abs((loop.v[k] - x[k]) - shaped[k]));
  }
  result.loop_identity_error = worst;

  if (traces) *traces = std::move(loop);
  return result;
}

}  // namespace efq
