#include "servoforge/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "servoforge/errors.hpp"

namespace servoforge {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, "ragged initializer for Matrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(std::initializer_list<double> values) {
    Matrix m(1, values.size());
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

Matrix Matrix::column_vector(std::initializer_list<double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::block(std::size_t i, std::size_t j, std::size_t r, std::size_t c) const {
    require(i + r <= rows_ && j + c <= cols_, "block exceeds matrix bounds");
    Matrix b(r, c);
    for (std::size_t p = 0; p < r; ++p)
        for (std::size_t q = 0; q < c; ++q) b(p, q) = (*this)(i + p, j + q);
    return b;
}

void Matrix::set_block(std::size_t i, std::size_t j, const Matrix& m) {
    require(i + m.rows() <= rows_ && j + m.cols() <= cols_, "block exceeds matrix bounds");
    for (std::size_t p = 0; p < m.rows(); ++p)
        for (std::size_t q = 0; q < m.cols(); ++q) (*this)(i + p, j + q) = m(p, q);
}

Matrix Matrix::operator-() const {
    Matrix m = *this;
    for (double& v : m.data_) v = -v;
    return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_, "matrix size mismatch in +");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_, "matrix size mismatch in -");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double Matrix::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Matrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix operator*(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matrix size mismatch in *");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator*(double s, Matrix m) { return m *= s; }
Matrix operator*(Matrix m, double s) { return m *= s; }

Matrix hstack(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "row mismatch in hstack");
    Matrix m(a.rows(), a.cols() + b.cols());
    m.set_block(0, 0, a);
    m.set_block(0, a.cols(), b);
    return m;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "column mismatch in vstack");
    Matrix m(a.rows() + b.rows(), a.cols());
    m.set_block(0, 0, a);
    m.set_block(a.rows(), 0, b);
    return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (a(i, j) == 0.0) continue;
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
        }
    return k;
}

namespace {

struct PivotedQR {
    Matrix qtb;              // Q^T * b, for each right-hand side
    Matrix r;                // upper-triangular factor (n x n part relevant)
    std::vector<std::size_t> perm;
};

// Householder QR with column pivoting, applied in place to a copy of [a | b].
PivotedQR pivoted_qr(Matrix a, Matrix b) {
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < n; ++j) perm[j] = j;

    auto col_norm2 = [&](std::size_t j, std::size_t from) {
        double s = 0.0;
        for (std::size_t i = from; i < m; ++i) s += a(i, j) * a(i, j);
        return s;
    };

    const std::size_t steps = std::min(m, n);
    for (std::size_t k = 0; k < steps; ++k) {
        // pivot: bring the column with the largest remaining norm to position k
        std::size_t best = k;
        double best_norm = col_norm2(k, k);
        for (std::size_t j = k + 1; j < n; ++j) {
            double nj = col_norm2(j, k);
            if (nj > best_norm) { best_norm = nj; best = j; }
        }
        if (best != k) {
            for (std::size_t i = 0; i < m; ++i) std::swap(a(i, k), a(i, best));
            std::swap(perm[k], perm[best]);
        }

        // Householder vector for column k
        double alpha = std::sqrt(best_norm);
        if (alpha == 0.0) continue;
        if (a(k, k) > 0.0) alpha = -alpha;
        std::vector<double> v(m - k);
        v[0] = a(k, k) - alpha;
        for (std::size_t i = k + 1; i < m; ++i) v[i - k] = a(i, k);
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        a(k, k) = alpha;
        for (std::size_t i = k + 1; i < m; ++i) a(i, k) = 0.0;
        if (vnorm2 == 0.0) continue;

        auto apply = [&](Matrix& mat, std::size_t col_from, std::size_t col_to) {
            for (std::size_t j = col_from; j < col_to; ++j) {
                double dot = 0.0;
                for (std::size_t i = k; i < m; ++i) dot += v[i - k] * mat(i, j);
                double f = 2.0 * dot / vnorm2;
                for (std::size_t i = k; i < m; ++i) mat(i, j) -= f * v[i - k];
            }
        };
        apply(a, k + 1, n);
        apply(b, 0, b.cols());
    }
    return {std::move(b), std::move(a), std::move(perm)};
}

} // namespace

Matrix solve_linear(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("solve_linear: row mismatch between a and b");
    if (a.rows() < a.cols()) throw DimensionError("solve_linear: underdetermined system");

    const std::size_t n = a.cols();
    PivotedQR qr = pivoted_qr(a, b);

    double r00 = std::abs(qr.r(0, 0));
    double rmin = r00;
    for (std::size_t k = 1; k < n; ++k) rmin = std::min(rmin, std::abs(qr.r(k, k)));
    if (r00 == 0.0 || rmin / r00 < 1e-12)
        throw SingularityError("solve_linear: rank-deficient system (|R_min|/|R_max| = " +
                                   std::to_string(r00 == 0.0 ? 0.0 : rmin / r00) + ")",
                               r00 == 0.0 ? 0.0 : rmin / r00);

    // back substitution on the permuted unknowns
    Matrix xp(n, b.cols());
    for (std::size_t col = 0; col < b.cols(); ++col) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = qr.qtb(ii, col);
            for (std::size_t j = ii + 1; j < n; ++j) s -= qr.r(ii, j) * xp(j, col);
            xp(ii, col) = s / qr.r(ii, ii);
        }
    }
    Matrix x(n, b.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t col = 0; col < b.cols(); ++col) x(qr.perm[i], col) = xp(i, col);
    return x;
}

std::size_t numerical_rank(const Matrix& a, double rel_tol) {
    Matrix dummy(a.rows(), 0);
    PivotedQR qr = pivoted_qr(a, dummy);
    const std::size_t k = std::min(a.rows(), a.cols());
    double scale = 0.0;
    for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, std::abs(qr.r(i, i)));
    if (scale == 0.0) return 0;
    std::size_t rank = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (std::abs(qr.r(i, i)) > rel_tol * scale) ++rank;
    return rank;
}

double determinant(const Matrix& a) {
    if (!a.square()) throw DimensionError("determinant: matrix must be square");
    const std::size_t n = a.rows();
    Matrix lu = a;
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            det = -det;
        }
        det *= lu(k, k);
        if (lu(k, k) == 0.0) return 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = lu(i, k) / lu(k, k);
            for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
    return det;
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, Complex fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = Complex(1.0, 0.0);
    return m;
}

CMatrix CMatrix::from_real(const Matrix& m) {
    CMatrix c(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) c(i, j) = Complex(m(i, j), 0.0);
    return c;
}

CMatrix& CMatrix::operator+=(const CMatrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_, "complex matrix size mismatch in +");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

double CMatrix::max_abs() const {
    double m = 0.0;
    for (const Complex& v : data_) m = std::max(m, std::abs(v));
    return m;
}

CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }

CMatrix operator-(CMatrix a, const CMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "complex matrix size mismatch in -");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) -= b(i, j);
    return a;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    require(a.cols() == b.rows(), "complex matrix size mismatch in *");
    CMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            Complex aik = a(i, k);
            if (aik == Complex(0.0, 0.0)) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

namespace {

// LU with partial pivoting on a copy; returns permutation sign, throws on
// pivot collapse relative to the matrix scale.
struct CLU {
    CMatrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
};

CLU clu_factor(const CMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("complex LU: matrix must be square");
    const std::size_t n = a.rows();
    CLU f{a, {}, 1};
    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
    double scale = f.lu.max_abs();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(f.lu(i, k)) > std::abs(f.lu(piv, k))) piv = i;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        if (std::abs(f.lu(k, k)) <= 1e-14 * scale)
            throw SingularityError("complex LU: singular matrix", 0.0);
        for (std::size_t i = k + 1; i < n; ++i) {
            Complex m = f.lu(i, k) / f.lu(k, k);
            f.lu(i, k) = m;
            for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= m * f.lu(k, j);
        }
    }
    return f;
}

} // namespace

CMatrix solve_linear(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("complex solve: row mismatch");
    CLU f = clu_factor(a);
    const std::size_t n = a.rows();
    CMatrix x(n, b.cols());
    for (std::size_t col = 0; col < b.cols(); ++col) {
        // forward
        for (std::size_t i = 0; i < n; ++i) {
            Complex s = b(f.perm[i], col);
            for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x(j, col);
            x(i, col) = s;
        }
        // backward
        for (std::size_t i = n; i-- > 0;) {
            Complex s = x(i, col);
            for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * x(j, col);
            x(i, col) = s / f.lu(i, i);
        }
    }
    return x;
}

CMatrix inverse(const CMatrix& a) { return solve_linear(a, CMatrix::identity(a.rows())); }

Complex determinant(const CMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("determinant: matrix must be square");
    if (a.rows() == 0) return Complex(1.0, 0.0);
    try {
        CLU f = clu_factor(a);
        Complex det(static_cast<double>(f.sign), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i) det *= f.lu(i, i);
        return det;
    } catch (const SingularityError&) {
        return Complex(0.0, 0.0);
    }
}

} // namespace servoforge
