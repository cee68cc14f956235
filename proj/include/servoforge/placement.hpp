#pragma once

#include <span>

#include "servoforge/matrix.hpp"

namespace servoforge {

Matrix controllability_matrix(const Matrix& f, const Matrix& g);
Matrix observability_matrix(const Matrix& f, const Matrix& h);

/// Single-input state-feedback pole placement (Ackermann). The desired set
/// must have exactly n entries and be closed under conjugation (pairing
/// tolerance 1e-9); eigenvalues of f - g*K then match it.
Matrix place(const Matrix& f, const Matrix& g, std::span<const Complex> desired);

/// Estimator gain L with eig(f - L*h) at the desired locations, via place
/// on the dual pair (f^T, h^T).
Matrix place_estimator(const Matrix& f, const Matrix& h, std::span<const Complex> desired);

} // namespace servoforge
