#pragma once

#include "servoforge/matrix.hpp"
#include "servoforge/polynomial.hpp"

namespace servoforge {

/// Exogenous-signal generator: a monic annihilating polynomial d(p) together
/// with a minimal realization (a, b, c) of its signal class, eta' = a*eta,
/// output c*eta, impulse drive through b. char(a) == d by construction.
struct SignalModel {
    Polynomial d;
    Matrix a, b, c;

    /// Canonical generator for d: top-row companion a, b = e1, c = e_m^T
    /// (the transfer c (sI-a)^-1 b equals 1/d(s)).
    static SignalModel from_polynomial(const Polynomial& d);

    /// Explicit generator matrices; d is recovered as char(a).
    static SignalModel from_matrices(Matrix a, Matrix b, Matrix c);

    std::size_t order() const { return a.rows(); }
};

} // namespace servoforge
