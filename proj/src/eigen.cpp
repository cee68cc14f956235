#include "servoforge/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "servoforge/errors.hpp"

namespace servoforge {

void sort_complex(std::vector<Complex>& values) {
    std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
}

bool conjugate_closed(std::vector<Complex> values, double tol) {
    while (!values.empty()) {
        Complex v = values.back();
        values.pop_back();
        if (std::abs(v.imag()) <= tol) continue;
        auto mate = std::min_element(values.begin(), values.end(), [&](const Complex& a, const Complex& b) {
            return std::abs(a - std::conj(v)) < std::abs(b - std::conj(v));
        });
        if (mate == values.end() || std::abs(*mate - std::conj(v)) > tol) return false;
        values.erase(mate);
    }
    return true;
}

namespace {

using CVec = std::vector<Complex>;

// Dense complex working matrix, index helpers only.
struct Work {
    std::size_t n;
    CVec a;
    Complex& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    Complex at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Reduce to upper Hessenberg form with complex Householder reflectors.
void hessenberg(Work& w) {
    const std::size_t n = w.n;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) scale += std::norm(w.at(i, k));
        scale = std::sqrt(scale);
        if (scale == 0.0) continue;

        Complex x0 = w.at(k + 1, k);
        double ax0 = std::abs(x0);
        Complex alpha = (ax0 == 0.0) ? Complex(-scale, 0.0) : -(x0 / ax0) * scale;

        CVec v(n - k - 1);
        v[0] = x0 - alpha;
        for (std::size_t i = k + 2; i < n; ++i) v[i - k - 1] = w.at(i, k);
        double vnorm2 = 0.0;
        for (const Complex& c : v) vnorm2 += std::norm(c);
        if (vnorm2 == 0.0) continue;

        // A <- (I - 2 v v* / |v|^2) A
        for (std::size_t j = k; j < n; ++j) {
            Complex dot(0.0, 0.0);
            for (std::size_t i = k + 1; i < n; ++i) dot += std::conj(v[i - k - 1]) * w.at(i, j);
            Complex f = 2.0 * dot / vnorm2;
            for (std::size_t i = k + 1; i < n; ++i) w.at(i, j) -= f * v[i - k - 1];
        }
        // A <- A (I - 2 v v* / |v|^2)
        for (std::size_t i = 0; i < n; ++i) {
            Complex dot(0.0, 0.0);
            for (std::size_t j = k + 1; j < n; ++j) dot += w.at(i, j) * v[j - k - 1];
            Complex f = 2.0 * dot / vnorm2;
            for (std::size_t j = k + 1; j < n; ++j) w.at(i, j) -= f * std::conj(v[j - k - 1]);
        }
    }
}

// Eigenvalues of the trailing 2x2 block, the one nearer d wins as shift.
Complex wilkinson_shift(const Work& w, std::size_t hi) {
    Complex a = w.at(hi - 1, hi - 1), b = w.at(hi - 1, hi);
    Complex c = w.at(hi, hi - 1), d = w.at(hi, hi);
    Complex tr = a + d;
    Complex disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
    Complex l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
    return std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
}

// One explicit single-shift QR sweep on the active block [lo, hi] using
// Givens rotations; O(n^2) per sweep on Hessenberg structure.
void qr_sweep(Work& w, std::size_t lo, std::size_t hi, Complex shift) {
    const std::size_t n = w.n;
    struct Rot { Complex c, s; };
    std::vector<Rot> rots(hi - lo);

    for (std::size_t k = lo; k <= hi; ++k) w.at(k, k) -= shift;

    for (std::size_t k = lo; k < hi; ++k) {
        Complex x = w.at(k, k), y = w.at(k + 1, k);
        double r = std::sqrt(std::norm(x) + std::norm(y));
        Rot g;
        if (r == 0.0) { g.c = Complex(1.0, 0.0); g.s = Complex(0.0, 0.0); }
        else { g.c = x / r; g.s = y / r; }
        rots[k - lo] = g;
        for (std::size_t j = k; j < n; ++j) {
            Complex t1 = w.at(k, j), t2 = w.at(k + 1, j);
            w.at(k, j) = std::conj(g.c) * t1 + std::conj(g.s) * t2;
            w.at(k + 1, j) = -g.s * t1 + g.c * t2;
        }
    }
    for (std::size_t k = lo; k < hi; ++k) {
        Rot g = rots[k - lo];
        // rows above k+2 are zero in columns k and k+1
        for (std::size_t i = 0; i <= std::min(k + 2, hi); ++i) {
            Complex t1 = w.at(i, k), t2 = w.at(i, k + 1);
            w.at(i, k) = t1 * g.c + t2 * g.s;
            w.at(i, k + 1) = -t1 * std::conj(g.s) + t2 * std::conj(g.c);
        }
    }
    for (std::size_t k = lo; k <= hi; ++k) w.at(k, k) += shift;
}

} // namespace

std::vector<Complex> eigenvalues(const Matrix& m) {
    if (!m.square()) throw DimensionError("eigenvalues: matrix must be square");
    if (!m.all_finite()) throw DomainError("eigenvalues: matrix entries must be finite");
    const std::size_t n = m.rows();
    std::vector<Complex> out;
    if (n == 0) return out;

    Work w{n, CVec(n * n)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w.at(i, j) = Complex(m(i, j), 0.0);
    hessenberg(w);

    double mat_scale = 0.0;
    for (const Complex& c : w.a) mat_scale = std::max(mat_scale, std::abs(c));
    if (mat_scale == 0.0) return std::vector<Complex>(n, Complex(0.0, 0.0));

    const double tol = 1e-12;
    const std::size_t iter_cap = 100 * n;
    std::size_t iters = 0;
    std::size_t hi = n - 1;

    auto negligible = [&](std::size_t i) {
        double s = std::abs(w.at(i - 1, i - 1)) + std::abs(w.at(i, i));
        if (s == 0.0) s = mat_scale;
        return std::abs(w.at(i, i - 1)) <= tol * s;
    };

    while (true) {
        // deflate converged 1x1 tails
        while (hi > 0 && negligible(hi)) {
            out.push_back(w.at(hi, hi));
            --hi;
        }
        if (hi == 0) {
            out.push_back(w.at(0, 0));
            break;
        }
        // find the active block [lo, hi]
        std::size_t lo = hi;
        while (lo > 0 && !negligible(lo)) --lo;

        if (hi - lo == 1) {
            // 2x2 block: closed form
            Complex a = w.at(lo, lo), b = w.at(lo, hi);
            Complex c = w.at(hi, lo), d = w.at(hi, hi);
            Complex tr = a + d;
            Complex disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
            out.push_back(0.5 * (tr + disc));
            out.push_back(0.5 * (tr - disc));
            if (lo == 0) break;
            hi = lo - 1;
            continue;
        }

        if (++iters > iter_cap)
            throw NumericalError("eigenvalues: QR iteration did not converge within " +
                                 std::to_string(iter_cap) + " sweeps");

        // occasional ad-hoc shift breaks symmetry stalls
        Complex shift = (iters % 17 == 0) ? w.at(hi, hi) + Complex(std::abs(w.at(hi, hi - 1)), 0.0)
                                          : wilkinson_shift(w, hi);
        qr_sweep(w, lo, hi, shift);
    }

    // conjugate symmetrization: collapse round-off imaginary parts, then pair
    double eig_scale = 1.0;
    for (const Complex& v : out) eig_scale = std::max(eig_scale, std::abs(v));
    const double ctol = 1e-8 * eig_scale;

    std::vector<Complex> reals, pos, neg;
    for (Complex v : out) {
        if (std::abs(v.imag()) <= ctol) reals.emplace_back(v.real(), 0.0);
        else if (v.imag() > 0.0) pos.push_back(v);
        else neg.push_back(v);
    }
    std::vector<Complex> paired;
    for (Complex p : pos) {
        auto mate = std::min_element(neg.begin(), neg.end(), [&](const Complex& a, const Complex& b) {
            return std::abs(a - std::conj(p)) < std::abs(b - std::conj(p));
        });
        if (mate == neg.end()) {
            reals.emplace_back(p.real(), 0.0);
            continue;
        }
        double re = 0.5 * (p.real() + mate->real());
        double im = 0.5 * (p.imag() - mate->imag());
        paired.emplace_back(re, im);
        paired.emplace_back(re, -im);
        neg.erase(mate);
    }
    for (Complex v : neg) reals.emplace_back(v.real(), 0.0);

    std::vector<Complex> result;
    result.reserve(n);
    result.insert(result.end(), reals.begin(), reals.end());
    result.insert(result.end(), paired.begin(), paired.end());
    sort_complex(result);
    return result;
}

Matrix companion(const Polynomial& p) {
    if (p.degree() < 1) throw DomainError("companion: polynomial degree must be at least 1");
    if (!p.is_monic(1e-12)) throw DomainError("companion: polynomial must be monic");
    const std::size_t m = p.degree();
    Matrix a(m, m);
    for (std::size_t j = 0; j < m; ++j) a(0, j) = -p.coeff(m - 1 - j);
    for (std::size_t i = 1; i < m; ++i) a(i, i - 1) = 1.0;
    return a;
}

std::vector<Complex> poly_roots(const Polynomial& p) {
    if (p.is_zero()) throw DomainError("poly_roots: zero polynomial has no defined roots");
    if (p.degree() == 0) return {};
    return eigenvalues(companion(p.monic()));
}

Polynomial characteristic_polynomial(const Matrix& m) {
    if (!m.square()) throw DimensionError("characteristic_polynomial: matrix must be square");
    const std::size_t n = m.rows();
    std::vector<double> coeffs(n + 1, 0.0);
    coeffs[n] = 1.0;
    Matrix mk = Matrix::identity(n);
    for (std::size_t k = 1; k <= n; ++k) {
        mk = m * mk;
        double ck = -mk.trace() / static_cast<double>(k);
        coeffs[n - k] = ck;
        for (std::size_t i = 0; i < n; ++i) mk(i, i) += ck;
    }
    return Polynomial(std::move(coeffs));
}

} // namespace servoforge
