#pragma once

#include <span>
#include <vector>

#include "servoforge/matrix.hpp"

namespace servoforge {

/// Real-coefficient polynomial, coefficients stored ascending by degree.
/// The coefficient list is kept trimmed: the leading coefficient is nonzero
/// unless the polynomial is identically zero (empty list is not allowed;
/// the zero polynomial is stored as {0}).
class Polynomial {
public:
    Polynomial() : coeffs_{0.0} {}
    explicit Polynomial(std::vector<double> ascending_coeffs);

    /// Real polynomial with the given leading coefficient and roots; complex
    /// roots must appear in conjugate pairs (within pairing tolerance) so the
    /// product is assembled from real linear/quadratic factors.
    static Polynomial from_roots(std::span<const Complex> roots, double leading = 1.0);

    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
    double leading() const noexcept { return coeffs_.back(); }
    double coeff(std::size_t k) const { return k < coeffs_.size() ? coeffs_[k] : 0.0; }

    bool is_monic(double tol = 0.0) const;
    Polynomial monic() const; // divides by the leading coefficient; idempotent

    double evaluate(double x) const;
    Complex evaluate(Complex x) const;

    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator-(const Polynomial& other) const;
    Polynomial operator*(const Polynomial& other) const;
    Polynomial operator*(double s) const;

private:
    void trim();
    std::vector<double> coeffs_;
};

} // namespace servoforge
