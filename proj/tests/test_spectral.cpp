#include <cmath>
#include <numbers>

#include "doctest.h"
#include "efq/errors.hpp"
#include "efq/polynomial.hpp"
#include "efq/spectral.hpp"
#include "oracles.hpp"

using namespace efq;
using doctest::Approx;

namespace {

AmplitudeResponse sampled(const FrequencyGrid& grid, double (*f)(double)) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.omega(i));
  return AmplitudeResponse(grid, v);
}

double one_plus_delay(double w) { return std::sqrt(2.0 + 2.0 * std::cos(w)); }

ContinuousTF example_plant() {
  return ContinuousTF(oracle::kPlantNum, oracle::kPlantDen, oracle::kSamplePeriod);
}

}  // namespace

TEST_CASE("frequency grid layout") {
  const FrequencyGrid grid(4096);
  CHECK(grid.size() == 4096);
  CHECK(grid.omega(0) == 0.0);
  CHECK(grid.omega(4095) == std::numbers::pi);
  CHECK(grid.spacing() == Approx(std::numbers::pi / 4095).epsilon(1e-15));
  CHECK_THROWS_AS(FrequencyGrid(63), ParameterError);
}

TEST_CASE("amplitude response rejects negative or non-finite samples") {
  const FrequencyGrid grid(64);
  std::vector<double> v(64, 1.0);
  v[7] = -1e-3;
  CHECK_THROWS_AS(AmplitudeResponse(grid, v), DomainError);
  v[7] = NAN;
  CHECK_THROWS_AS(AmplitudeResponse(grid, v), DomainError);
  CHECK_THROWS(AmplitudeResponse(grid, std::vector<double>(10, 1.0)));
}

TEST_CASE("l2_norm_sq") {
  const FrequencyGrid grid;
  CHECK(l2_norm_sq(AmplitudeResponse::constant(grid, 2.0)) == Approx(4.0).epsilon(1e-14));
  CHECK(l2_norm_sq(AmplitudeResponse::constant(grid, 0.0)) == 0.0);
  // (1/2pi) int (2 + 2 cos w) = 2 = ||[1, 1]||^2.
  CHECK(l2_norm_sq(sampled(grid, one_plus_delay)) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("log_geometric_mean") {
  const FrequencyGrid grid;
  CHECK(log_geometric_mean(AmplitudeResponse::constant(grid, std::exp(1.0))) ==
        Approx(1.0).epsilon(1e-14));
  CHECK(log_geometric_mean(AmplitudeResponse::constant(grid, 1.0)) == 0.0);

  // Jensen: (1/2pi) int ln(2 + 2 cos w) = 0. The integrand has a log
  // singularity at pi; nudge the endpoint sample to keep it finite.
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = one_plus_delay(grid.omega(i));
  v.back() = one_plus_delay(std::numbers::pi - 0.5 * grid.spacing());
  CHECK(std::abs(log_geometric_mean(AmplitudeResponse(grid, v))) < 1e-3);

  // Away from the singularity the closed form is matched tightly.
  const auto shifted = AmplitudeResponse(grid, v).map([](double x) { return std::sqrt(x * x + 1.0); });
  CHECK(log_geometric_mean(shifted) == Approx(0.5 * oracle::log_cosine_mean(2.0, 3.0)).epsilon(1e-12));

  std::vector<double> bad(grid.size(), 1.0);
  bad[123] = 0.0;
  try {
    log_geometric_mean(AmplitudeResponse(grid, bad));
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("123") != std::string::npos);
  }
}

TEST_CASE("quadrature is exact for low-degree cosine polynomials") {
  const FrequencyGrid grid(4096);
  // p^2 = (1 + cos w)^2 = 3/2 + 2 cos w + cos(2w)/2 has mean 3/2.
  const auto p = sampled(grid, [](double w) { return 1.0 + std::cos(w); });
  CHECK(l2_norm_sq(p) == Approx(1.5).epsilon(1e-12));
  CHECK(std::abs(spectral_mean(p, [](double, double w) { return std::cos(2 * w); })) < 1e-12);
}

TEST_CASE("even-symmetry contract against a full-circle reference") {
  const FrequencyGrid grid;
  const auto p = sampled(grid, oracle::plant_mag);
  // Reference: trapezoid on a uniform grid over [-pi, pi), periodic integrand.
  const std::size_t m = 2 * (grid.size() - 1);
  double ref = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double w = -std::numbers::pi + 2.0 * std::numbers::pi * k / m;
    ref += std::pow(oracle::plant_mag(std::abs(w)), 2);
  }
  ref /= static_cast<double>(m);
  CHECK(l2_norm_sq(p) == Approx(ref).epsilon(1e-10));
}

TEST_CASE("amplitude_of_tf") {
  const FrequencyGrid grid(256);
  const auto delay = amplitude_of_tf(RationalDiscreteTF({0.0, 1.0}), grid);
  for (double v : delay.values()) CHECK(v == Approx(1.0).epsilon(1e-14));

  const auto sum = amplitude_of_tf(RationalDiscreteTF({1.0, 1.0}), grid);
  for (std::size_t i = 0; i < grid.size(); i += 17) {
    CHECK(sum[i] == Approx(one_plus_delay(grid.omega(i))).epsilon(1e-12));
  }
  CHECK(amplitude_of_tf(RationalDiscreteTF({1.0}, {1.0, -0.5}), grid)[0] ==
        Approx(2.0).epsilon(1e-14));
}

TEST_CASE("cascade amplitude is the pointwise product") {
  const FrequencyGrid grid(512);
  const RationalDiscreteTF a({1.0, 0.3}, {1.0, -0.6});
  const RationalDiscreteTF b({0.5, -0.2, 0.1}, {1.0, 0.2, 0.3});
  const RationalDiscreteTF ab(poly::multiply(a.num(), b.num()), poly::multiply(a.den(), b.den()));
  const auto pa = amplitude_of_tf(a, grid);
  const auto pb = amplitude_of_tf(b, grid);
  const auto pab = amplitude_of_tf(ab, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(pab[i] - pa[i] * pb[i]) < 1e-10);
  }
}

TEST_CASE("discrete transfer function stability") {
  CHECK(RationalDiscreteTF({1.0}, {1.0, -0.5}).is_stable());
  CHECK_FALSE(RationalDiscreteTF({1.0}, {1.0, -1.0}).is_stable());
  CHECK_THROWS_AS(RationalDiscreteTF({1.0}, {1.0, -1.5}).require_stable("test"), DomainError);
  const RationalDiscreteTF scaled({2.0, 4.0}, {2.0, 1.0});
  CHECK(scaled.den()[0] == 1.0);
  CHECK(scaled.num()[1] == 2.0);
}

TEST_CASE("continuous transfer function preconditions") {
  CHECK_THROWS_AS(ContinuousTF({1.0, 0.0, 0.0}, {1.0, 1.0}, 0.1), DomainError);
  CHECK_THROWS_AS(ContinuousTF({1.0}, {1.0, -1.0}, 0.1), DomainError);
  CHECK_THROWS_AS(ContinuousTF({1.0}, {1.0, 1.0}, 0.0), DomainError);
  CHECK_NOTHROW(example_plant());
}

TEST_CASE("ct_frequency_map") {
  const FrequencyGrid grid(1025);
  const auto p1 = ct_frequency_map(example_plant(), 1, grid);
  CHECK_FALSE(p1.edge().has_value());
  for (std::size_t i = 0; i < grid.size(); i += 31) {
    CHECK(p1[i] == Approx(oracle::plant_mag(grid.omega(i))).epsilon(1e-13));
    CHECK(p1[i] > 0.0);
  }

  const auto p2 = ct_frequency_map(example_plant(), 2, grid);
  const std::size_t above = grid.size() / 2 + 1;
  CHECK(grid.omega(above) > std::numbers::pi / 2);
  CHECK(p2[above] == 0.0);
  CHECK(p2[100] == Approx(oracle::plant_mag(2 * grid.omega(100))).epsilon(1e-13));

  // |1/(j + 1)| = 1/sqrt(2) at w = 1 rad with T_s = 1.
  const FrequencyGrid fine(std::size_t(std::numbers::pi * 1000) + 1);
  const auto simple = ct_frequency_map(ContinuousTF({1.0}, {1.0, 1.0}, 1.0), 1, fine);
  const std::size_t k = 1000;  // omega = k * pi / (n - 1) is close to 1
  const double w = fine.omega(k);
  CHECK(simple[k] == Approx(1.0 / std::sqrt(1.0 + w * w)).epsilon(1e-14));
  CHECK(std::abs(w - 1.0) < 1e-3);
}

TEST_CASE("oversample_response") {
  const FrequencyGrid grid;
  const auto p = ct_frequency_map(example_plant(), 1, grid);
  CHECK_THROWS_AS(oversample_response(p, 0), DomainError);

  const auto same = oversample_response(p, 1);
  CHECK(same.values() == p.values());

  const auto c4 = oversample_response(AmplitudeResponse::constant(grid, 3.0), 4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double expected = grid.omega(i) <= std::numbers::pi / 4 ? 3.0 : 0.0;
    CHECK(c4[i] == expected);
  }

  for (int lambda = 1; lambda <= 4; ++lambda) {
    const auto pl = oversample_response(p, lambda);
    CHECK(l2_norm_sq(pl) == Approx(l2_norm_sq(p) / lambda).epsilon(1e-6));
    // Matches the direct continuous-time map at the same layout.
    const auto direct = ct_frequency_map(example_plant(), lambda, grid);
    for (std::size_t i = 0; i < grid.size(); i += 97) {
      CHECK(pl[i] == Approx(direct[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("is_almost_constant") {
  const FrequencyGrid grid;
  CHECK(is_almost_constant(AmplitudeResponse::constant(grid, 2.5), 1e-9));
  CHECK_FALSE(is_almost_constant(sampled(grid, one_plus_delay), 1e-3));
  std::vector<double> v(grid.size(), 1.0);
  v[50] += 1e-12;
  CHECK(is_almost_constant(AmplitudeResponse(grid, v), 1e-6));
}

TEST_CASE("polynomial roots round-trip") {
  const std::vector<double> c{1.0, -6.0, 11.0, -6.0};
  auto r = poly::roots(c);
  std::sort(r.begin(), r.end(), [](auto a, auto b) { return a.real() < b.real(); });
  REQUIRE(r.size() == 3);
  CHECK(r[0].real() == Approx(1.0).epsilon(1e-12));
  CHECK(r[2].real() == Approx(3.0).epsilon(1e-12));
  const auto back = poly::from_roots(r);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(back[i] == Approx(c[i]).epsilon(1e-12));
}
