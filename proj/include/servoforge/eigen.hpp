#pragma once

#include <vector>

#include "servoforge/matrix.hpp"
#include "servoforge/polynomial.hpp"

namespace servoforge {

/// All eigenvalues of a square real matrix, with multiplicity, sorted
/// lexicographically by (re, im). Near-conjugate values are paired and
/// symmetrized so the result is exactly closed under conjugation; this keeps
/// downstream real-valued pole sums free of imaginary residue.
///
/// Hessenberg reduction followed by shifted QR iteration; iteration cap
/// 100*n, deflation when a subdiagonal entry falls below 1e-12 relative to
/// its diagonal neighbours.
std::vector<Complex> eigenvalues(const Matrix& m);

/// Companion matrix in top-row form: char poly of the result equals p.
/// p must be monic (degree >= 1); callers normalize first.
Matrix companion(const Polynomial& p);

/// Roots of p with multiplicity, via the companion-matrix eigenproblem.
std::vector<Complex> poly_roots(const Polynomial& p);

/// Characteristic polynomial of a square matrix (monic, ascending
/// coefficients) by the Leverrier-Faddeev recursion. Exact in coefficient
/// arithmetic up to rounding; intended for small n.
Polynomial characteristic_polynomial(const Matrix& m);

void sort_complex(std::vector<Complex>& values);

/// true when the multiset is closed under conjugation with pairing
/// tolerance tol (absolute on the pair distance).
bool conjugate_closed(std::vector<Complex> values, double tol = 1e-9);

} // namespace servoforge
