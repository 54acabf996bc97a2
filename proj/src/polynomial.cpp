#include "efq/polynomial.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace efq::poly {

std::vector<Complex> roots(std::span<const double> coeffs) {
  std::size_t first = 0;
  while (first < coeffs.size() && coeffs[first] == 0.0) ++first;
  if (coeffs.size() - first <= 1) return {};
  std::size_t last = coeffs.size();
  std::size_t zeros_at_origin = 0;
  while (last - first > 1 && coeffs[last - 1] == 0.0) {
    --last;
    ++zeros_at_origin;
  }

  std::vector<Complex> out(zeros_at_origin, Complex(0.0, 0.0));
  const auto degree = static_cast<Eigen::Index>(last - first - 1);
  if (degree == 0) return out;
  const double lead = coeffs[first];
  if (degree == 1) {
    out.emplace_back(-coeffs[first + 1] / lead, 0.0);
    return out;
  }

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (Eigen::Index j = 0; j < degree; ++j) {
    companion(0, j) = -coeffs[first + 1 + static_cast<std::size_t>(j)] / lead;
  }
  for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto& eig = solver.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) out.push_back(eig[i]);
  return out;
}

std::vector<double> from_roots(std::span<const Complex> roots) {
  std::vector<Complex> acc{Complex(1.0, 0.0)};
  for (const Complex& r : roots) {
    std::vector<Complex> next(acc.size() + 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i] += acc[i];
      next[i + 1] -= acc[i] * r;
    }
    acc = std::move(next);
  }
  std::vector<double> out(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(),
                 [](const Complex& c) { return c.real(); });
  return out;
}

std::vector<double> multiply(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

Complex evaluate(std::span<const double> coeffs, Complex x) {
  Complex acc(0.0, 0.0);
  for (double c : coeffs) acc = acc * x + c;
  return acc;
}

double max_root_magnitude(std::span<const double> coeffs) {
  double out = 0.0;
  for (const Complex& r : roots(coeffs)) out = std::max(out, std::abs(r));
  return out;
}

}  // namespace efq::poly
