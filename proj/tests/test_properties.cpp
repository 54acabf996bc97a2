#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "efq/design.hpp"
#include "efq/fit.hpp"
#include "efq/polynomial.hpp"
#include "efq/simulate.hpp"
#include "random_plants.hpp"

using namespace efq;
using fixtures::random_discrete;
using fixtures::random_response;

TEST_CASE("theta^2/alpha is strictly decreasing in alpha") {
  std::mt19937_64 rng(11);
  const FrequencyGrid grid;
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_response(rng, grid);
    const double scale = l2_norm_sq(p);
    double prev = INFINITY;
    for (int i = 0; i < 100; ++i) {
      const double alpha = scale * std::pow(10.0, -10.0 + 12.0 * i / 99.0);
      const double v = log_theta_sq_over_alpha(alpha, p);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("N increases and C decreases in alpha") {
  std::mt19937_64 rng(12);
  const FrequencyGrid grid;
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_response(rng, grid);
    const double scale = l2_norm_sq(p);
    // Below about 1e-5 of the plant energy N is flat to working precision.
    double prev_n = 0.0;
    double prev_c = INFINITY;
    for (int i = 0; i < 60; ++i) {
      const double alpha = scale * std::pow(10.0, -5.0 + 5.0 * i / 59.0);
      const double n = capital_N(alpha, p);
      const double c = capital_C(alpha, p);
      CHECK(n > prev_n);
      CHECK(c < prev_c);
      CHECK(c >= 1.0 - 1e-12);
      prev_n = n;
      prev_c = c;
    }
  }
}

TEST_CASE("the optimal design is stationary, feasible and normalized") {
  std::mt19937_64 rng(13);
  const FrequencyGrid grid;
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_response(rng, grid);
    for (double nu : {1.2, 2.0, 17.0, 1e4}) {
      const DesignProblem prob(p, nu - 1.0);
      const OptimalDesign d = solve_alpha_opt(prob);
      if (d.constant_plant) continue;
      INFO("trial " << trial << " nu " << nu);
      CHECK(std::abs(theta(d.alpha_opt, p) * theta(d.alpha_opt, p) / d.alpha_opt - nu) <= 1e-10 * nu);
      CHECK(d.norm_r_sq < nu);
      CHECK(std::abs(log_geometric_mean(d.r_opt)) < 1e-10);
      CHECK(phi(d.alpha_opt, prob) == doctest::Approx(d.alpha_opt).epsilon(1e-9));
      const double h = 1e-4;
      const double slope = (phi(d.alpha_opt * (1 + h), prob) - phi(d.alpha_opt * (1 - h), prob)) /
                           (2 * h * d.alpha_opt);
      CHECK(std::abs(slope) * d.alpha_opt / d.distortion <= 1e-5);
      CHECK(d.distortion <= l2_norm_sq(p) / (nu - 1.0) * (1 + 1e-12));
    }
  }
}

TEST_CASE("oversampling by lambda equals raising nu to the lambda") {
  std::mt19937_64 rng(14);
  const FrequencyGrid grid;
  for (int trial = 0; trial < 10; ++trial) {
    const auto base = random_response(rng, grid);
    for (double nu : {1.2, 2.0, 5.0, 17.0}) {
      const double ref = solve_alpha_opt(DesignProblem(base, std::pow(nu, 1) - 1.0)).alpha_opt;
      CHECK(ref > 0.0);
      for (int lambda = 1; lambda <= 4; ++lambda) {
        const double lifted = solve_alpha_opt(DesignProblem(base, std::pow(nu, lambda) - 1.0)).alpha_opt;
        const double over =
            solve_alpha_opt(DesignProblem(oversample_response(base, lambda), nu - 1.0)).alpha_opt;
        INFO("trial " << trial << " nu " << nu << " lambda " << lambda);
        CHECK(std::abs(over - lifted) <= 1e-6 * lifted);
        CHECK(over <= l2_norm_sq(base) / (std::pow(nu, lambda) - 1.0) * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("norm-constrained FIR certificates on random instances") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> budget_dist(1.0, 3.0);
  std::uniform_int_distribution<int> order_dist(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto plant = random_discrete(rng);
    const double budget = budget_dist(rng);
    const auto order = static_cast<std::size_t>(order_dist(rng));
    const FirFit fit = norm_constrained_fir(plant, order, budget);
    INFO("trial " << trial << " budget " << budget << " order " << order);
    CHECK(fit.filter.taps.front() == 1.0);
    CHECK(fit.filter.taps.size() == order + 1);
    CHECK(fit.slack >= -1e-12);
    CHECK(fit.norm_sq <= budget * (1 + 1e-12));
    CHECK(fit.stationarity_residual <= 1e-8 * std::max(1.0, fit.gradient_norm));
    CHECK(fit.kkt_multiplier >= 0.0);
    CHECK(fit.kkt_multiplier * std::max(fit.slack, 0.0) <= 1e-8 * std::max(1.0, fit.gradient_norm));
    // A larger budget never does worse.
    CHECK(norm_constrained_fir(plant, order, budget + 0.5).objective <= fit.objective * (1 + 1e-10));
  }
}

TEST_CASE("realizable fits are stable, head-normalized and no better than the ideal") {
  std::mt19937_64 rng(16);
  const FrequencyGrid grid;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_response(rng, grid);
    const double gamma = gamma_from_bits(1 + trial % 8, 4.0);
    const OptimalDesign d = solve_alpha_opt(DesignProblem(p, gamma));
    INFO("trial " << trial);
    const auto yw = yule_walker_fit(d.r_opt, 4);
    CHECK(yw.is_stable());
    CHECK(impulse_response(yw, 1)[0] == 1.0);
    const FitReport yr = evaluate_fit(yw, p, gamma, d.alpha_opt, "yw");
    CHECK(yr.achieved_mse >= d.alpha_opt * (1 - 1e-9));

    const FirFit fir = norm_constrained_fir(p, 4, d.norm_r_sq);
    const FitReport qr = evaluate_fit(fir.filter.as_tf(), p, gamma, d.alpha_opt, "qcqp");
    CHECK(qr.feasible);
    CHECK(qr.achieved_mse >= d.alpha_opt * (1 - 1e-9));
  }
}

TEST_CASE("quantizer error stays within half a step when not overloaded") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int bits = 1; bits <= 10; ++bits) {
    const double sat = 3.0;
    const double step = 2.0 * sat / (std::pow(2.0, bits) - 1.0);
    const MidRiseQuantizer q{step, sat};
    for (int i = 0; i < 5000; ++i) {
      const double xi = gauss(rng);
      const QuantizedSample s = quantize_midrise(xi, q);
      if (!s.overloaded) CHECK(std::abs(s.value - xi) <= 0.5 * step * (1 + 1e-12));
      CHECK(std::abs(s.value) <= sat + 1e-12);
    }
  }
}

TEST_CASE("loop identity holds for random shapers") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const auto shaper = normalize_head(random_discrete(rng));
    SignalModel model;
    model.kind = InputKind::white;
    model.length = 4000;
    model.seed = 100 + static_cast<std::uint64_t>(trial);
    const auto x = gen_white_input(model);
    const MidRiseQuantizer q{0.05, 40.0};
    const LoopTraces t = run_feedback_loop(x, shaper, q);
    const auto rw = filter_signal(shaper, t.w);
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(t.v[k] - x[k] - rw[k]));
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("Yule-Walker reproduces the magnitude of a filter of the same order") {
  std::mt19937_64 rng(19);
  const FrequencyGrid grid;
  int reproduced = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto known = fixtures::random_discrete(rng);
    const auto target = amplitude_of_tf(known, grid);
    const std::size_t order = std::max(known.num().size(), known.den().size()) - 1;
    const auto fit = yule_walker_fit(target, order);
    const auto mag = amplitude_of_tf(fit, grid);
    // Head normalization fixes the gain, so compare at the best common scale.
    double mt = 0.0;
    double mm = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      mt += mag[i] * target[i];
      mm += mag[i] * mag[i];
    }
    const double scale = mt / mm;
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += std::pow(mag[i] * scale - target[i], 2);
    const double rms = std::sqrt(acc / static_cast<double>(grid.size()));
    INFO("trial " << trial << " order " << order << " rms " << rms);
    CHECK(rms < 1e-3);
    reproduced += rms < 1e-3;
  }
  CHECK(reproduced == 30);
}
