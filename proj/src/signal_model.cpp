#include "servoforge/signal_model.hpp"

#include "servoforge/eigen.hpp"
#include "servoforge/errors.hpp"

namespace servoforge {

SignalModel SignalModel::from_polynomial(const Polynomial& d) {
    if (d.degree() < 1) throw DomainError("SignalModel: d must have degree >= 1");
    Polynomial dm = d.monic();
    const std::size_t m = dm.degree();
    Matrix a = companion(dm);
    Matrix b(m, 1);
    b(0, 0) = 1.0;
    Matrix c(1, m);
    c(0, m - 1) = 1.0;
    return {dm, a, b, c};
}

SignalModel SignalModel::from_matrices(Matrix a, Matrix b, Matrix c) {
    if (!a.square()) throw DimensionError("SignalModel: a must be square");
    if (b.rows() != a.rows() || c.cols() != a.cols())
        throw DimensionError("SignalModel: b/c dimensions must match a");
    Polynomial d = characteristic_polynomial(a);
    return {std::move(d), std::move(a), std::move(b), std::move(c)};
}

} // namespace servoforge
