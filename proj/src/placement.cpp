#include "servoforge/placement.hpp"

#include <string>
#include <vector>

#include "servoforge/eigen.hpp"
#include "servoforge/errors.hpp"
#include "servoforge/polynomial.hpp"

namespace servoforge {

Matrix controllability_matrix(const Matrix& f, const Matrix& g) {
    const std::size_t n = f.rows();
    Matrix c(n, n * g.cols());
    Matrix col = g;
    for (std::size_t k = 0; k < n; ++k) {
        c.set_block(0, k * g.cols(), col);
        col = f * col;
    }
    return c;
}

Matrix observability_matrix(const Matrix& f, const Matrix& h) {
    return controllability_matrix(f.transpose(), h.transpose()).transpose();
}

Matrix place(const Matrix& f, const Matrix& g, std::span<const Complex> desired) {
    if (!f.square()) throw DimensionError("place: F must be square");
    if (g.cols() != 1) throw DomainError("place: single-input plants only");
    if (g.rows() != f.rows()) throw DimensionError("place: G row count must match F");
    const std::size_t n = f.rows();
    if (desired.size() != n)
        throw DomainError("place: need exactly " + std::to_string(n) + " desired poles, got " +
                          std::to_string(desired.size()));

    std::vector<Complex> want(desired.begin(), desired.end());
    if (!conjugate_closed(want, 1e-9))
        throw DomainError("place: desired pole set is not closed under conjugation");

    Matrix ctrb = controllability_matrix(f, g);
    std::size_t rank = numerical_rank(ctrb);
    if (rank < n)
        throw ControllabilityError("place: (F, G) is uncontrollable (controllability rank " +
                                       std::to_string(rank) + " of " + std::to_string(n) + ")",
                                   rank, n);

    // Ackermann: K = e_n^T C^-1 phi_d(F)
    Polynomial phi = Polynomial::from_roots(want);
    Matrix phi_f(n, n);
    for (std::size_t i = 0; i < n; ++i) phi_f(i, i) = phi.coeff(n); // leading (monic: 1)
    for (std::size_t k = n; k-- > 0;) {
        phi_f = f * phi_f;
        for (std::size_t i = 0; i < n; ++i) phi_f(i, i) += phi.coeff(k);
    }
    Matrix en(n, 1);
    en(n - 1, 0) = 1.0;
    Matrix w = solve_linear(ctrb.transpose(), en); // C^T w = e_n
    return w.transpose() * phi_f;
}

Matrix place_estimator(const Matrix& f, const Matrix& h, std::span<const Complex> desired) {
    if (h.rows() != 1) throw DomainError("place_estimator: single-output plants only");
    Matrix k;
    try {
        k = place(f.transpose(), h.transpose(), desired);
    } catch (const ControllabilityError& e) {
        throw ObservabilityError("place_estimator: (F, H) is unobservable (observability rank " +
                                     std::to_string(e.rank) + " of " + std::to_string(e.order) + ")",
                                 e.rank, e.order);
    }
    return k.transpose();
}

} // namespace servoforge
