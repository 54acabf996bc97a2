#pragma once

#include <complex>
#include <span>
#include <vector>

// Small polynomial helpers. Coefficients are stored in descending powers of
// the variable, so {1, -0.5} is x - 0.5.
namespace efq::poly {

using Complex = std::complex<double>;

/// Roots via eigenvalues of the companion matrix. Leading zero coefficients
/// are ignored; trailing zeros produce roots at the origin.
std::vector<Complex> roots(std::span<const double> coeffs);

/// Monic real polynomial with the given roots (conjugate pairs expected).
std::vector<double> from_roots(std::span<const Complex> roots);

std::vector<double> multiply(std::span<const double> a, std::span<const double> b);

Complex evaluate(std::span<const double> coeffs, Complex x);

/// Largest root magnitude, 0 for constant polynomials.
double max_root_magnitude(std::span<const double> coeffs);

}  // namespace efq::poly
