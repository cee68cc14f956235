#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace servoforge {

using Complex = std::complex<double>;

/// Dense real matrix, row-major storage. Small systems only (n <= ~100);
/// everything is value-semantic and allocation is not a concern here.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::initializer_list<double> values);
    static Matrix column_vector(std::initializer_list<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    Matrix transpose() const;
    Matrix block(std::size_t i, std::size_t j, std::size_t r, std::size_t c) const;
    void set_block(std::size_t i, std::size_t j, const Matrix& m);

    Matrix operator-() const;
    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    double frobenius_norm() const;
    double max_abs() const;
    double trace() const;
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix m);
Matrix operator*(Matrix m, double s);

Matrix hstack(const Matrix& a, const Matrix& b);
Matrix vstack(const Matrix& a, const Matrix& b);
Matrix kron(const Matrix& a, const Matrix& b);

/// Least-squares solution of a*x = b via Householder QR with column pivoting.
/// Exact solve for square well-conditioned a. Rank deficiency within
/// |R_kk|/|R_00| < 1e-12 raises SingularityError carrying that ratio.
Matrix solve_linear(const Matrix& a, const Matrix& b);

/// Numerical rank from the pivoted-QR R diagonal, threshold relative to the
/// largest diagonal entry.
std::size_t numerical_rank(const Matrix& a, double rel_tol = 1e-9);

double determinant(const Matrix& a);

/// Dense complex matrix, just enough for frequency-response work:
/// LU solve, determinant, inverse.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols, Complex fill = Complex(0.0, 0.0));
    static CMatrix identity(std::size_t n);
    static CMatrix from_real(const Matrix& m);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    Complex operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    CMatrix& operator+=(const CMatrix& other);
    double max_abs() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

CMatrix operator+(CMatrix a, const CMatrix& b);
CMatrix operator-(CMatrix a, const CMatrix& b);
CMatrix operator*(const CMatrix& a, const CMatrix& b);

/// LU solve with partial pivoting; SingularityError when a pivot underflows
/// relative to the matrix scale.
CMatrix solve_linear(const CMatrix& a, const CMatrix& b);
CMatrix inverse(const CMatrix& a);
Complex determinant(const CMatrix& a);

} // namespace servoforge
