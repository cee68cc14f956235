#include "servoforge/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include "servoforge/errors.hpp"

namespace servoforge {

Polynomial::Polynomial(std::vector<double> ascending_coeffs) : coeffs_(std::move(ascending_coeffs)) {
    if (coeffs_.empty()) throw DomainError("polynomial needs at least one coefficient");
    for (double c : coeffs_)
        if (!std::isfinite(c)) throw DomainError("polynomial coefficient not finite");
    trim();
}

void Polynomial::trim() {
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
}

Polynomial Polynomial::from_roots(std::span<const Complex> roots, double leading) {
    Polynomial p(std::vector<double>{leading});
    std::vector<Complex> remaining(roots.begin(), roots.end());
    // consume real roots directly, complex ones as conjugate quadratics
    while (!remaining.empty()) {
        Complex r = remaining.back();
        remaining.pop_back();
        if (r.imag() == 0.0) {
            p = p * Polynomial({-r.real(), 1.0});
            continue;
        }
        auto mate = std::min_element(remaining.begin(), remaining.end(),
                                     [&](const Complex& a, const Complex& b) {
                                         return std::abs(a - std::conj(r)) < std::abs(b - std::conj(r));
                                     });
        if (mate == remaining.end() || std::abs(*mate - std::conj(r)) > 1e-6 * (1.0 + std::abs(r)))
            throw DomainError("from_roots: complex roots must come in conjugate pairs");
        double re = 0.5 * (r.real() + mate->real());
        double m2 = std::abs(r) * std::abs(*mate);
        remaining.erase(mate);
        p = p * Polynomial({m2, -2.0 * re, 1.0});
    }
    return p;
}

bool Polynomial::is_monic(double tol) const { return std::abs(leading() - 1.0) <= tol; }

Polynomial Polynomial::monic() const {
    if (is_zero()) throw DomainError("cannot normalize the zero polynomial");
    std::vector<double> c = coeffs_;
    double lead = c.back();
    for (double& v : c) v /= lead;
    c.back() = 1.0;
    return Polynomial(std::move(c));
}

double Polynomial::evaluate(double x) const {
    double acc = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 0;) acc = acc * x + coeffs_[k];
    return acc;
}

Complex Polynomial::evaluate(Complex x) const {
    Complex acc(0.0, 0.0);
    for (std::size_t k = coeffs_.size(); k-- > 0;) acc = acc * x + coeffs_[k];
    return acc;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
    std::vector<double> c(std::max(coeffs_.size(), other.coeffs_.size()), 0.0);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) c[k] += coeffs_[k];
    for (std::size_t k = 0; k < other.coeffs_.size(); ++k) c[k] += other.coeffs_[k];
    return Polynomial(std::move(c));
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
    std::vector<double> c(std::max(coeffs_.size(), other.coeffs_.size()), 0.0);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) c[k] += coeffs_[k];
    for (std::size_t k = 0; k < other.coeffs_.size(); ++k) c[k] -= other.coeffs_[k];
    return Polynomial(std::move(c));
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
    if (is_zero() || other.is_zero()) return Polynomial();
    std::vector<double> c(coeffs_.size() + other.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
        for (std::size_t j = 0; j < other.coeffs_.size(); ++j) c[i + j] += coeffs_[i] * other.coeffs_[j];
    return Polynomial(std::move(c));
}

Polynomial Polynomial::operator*(double s) const {
    std::vector<double> c = coeffs_;
    for (double& v : c) v *= s;
    return Polynomial(std::move(c));
}

} // namespace servoforge
