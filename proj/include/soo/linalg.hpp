#pragma once

// Small dense symmetric linear algebra. Dimensions are tiny (2..50), so
// everything is plain row-major storage and O(d^3) kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "soo/error.hpp"

namespace soo {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// General dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const noexcept { return data_; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data_).subspan(i * cols_, cols_);
    }

    Vector column(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw DimensionError("matrix product", a.cols_, b.rows_);
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend Matrix operator-(const Matrix& a, const Matrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw DimensionError("matrix difference", a.rows_, b.rows_);
        Matrix c = a;
        for (std::size_t i = 0; i < c.data_.size(); ++i) c.data_[i] -= b.data_[i];
        return c;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Symmetric matrix. Every constructor symmetrizes its input as (M + M^T) / 2,
/// so entries(i, j) == entries(j, i) holds bit-for-bit.
class SymMatrix {
public:
    explicit SymMatrix(const Matrix& m) : m_(m.rows(), m.rows()) {
        if (m.rows() == 0) throw InvalidArgument("SymMatrix: dimension must be at least 1");
        if (m.rows() != m.cols()) throw DimensionError("SymMatrix: non-square input", m.rows(), m.cols());
        const std::size_t d = m.rows();
        for (std::size_t i = 0; i < d; ++i) {
            m_(i, i) = m(i, i);
            for (std::size_t j = i + 1; j < d; ++j) {
                const double v = 0.5 * (m(i, j) + m(j, i));
                m_(i, j) = v;
                m_(j, i) = v;
            }
        }
    }

    static SymMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const std::size_t d = rows.size();
        if (d == 0) throw InvalidArgument("SymMatrix: dimension must be at least 1");
        Matrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            if (rows[i].size() != d) throw DimensionError("SymMatrix row " + std::to_string(i), d, rows[i].size());
            for (std::size_t j = 0; j < d; ++j) m(i, j) = rows[i][j];
        }
        return SymMatrix(m);
    }

    static SymMatrix identity(std::size_t d, double scale = 1.0) {
        Matrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) m(i, i) = scale;
        return SymMatrix(m);
    }

    static SymMatrix diagonal(std::span<const double> values) {
        Matrix m(values.size(), values.size());
        for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
        return SymMatrix(m);
    }

    static SymMatrix diagonal(std::initializer_list<double> values) {
        return diagonal(std::span<const double>(values.begin(), values.size()));
    }

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

    std::vector<std::vector<double>> to_rows() const {
        std::vector<std::vector<double>> rows(dim());
        for (std::size_t i = 0; i < dim(); ++i) rows[i].assign(m_.row(i).begin(), m_.row(i).end());
        return rows;
    }

    double frobenius_norm() const { return m_.frobenius_norm(); }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
        return t;
    }

    Vector operator*(std::span<const double> x) const {
        if (x.size() != dim()) throw DimensionError("matrix-vector product", dim(), x.size());
        Vector y(dim(), 0.0);
        for (std::size_t i = 0; i < dim(); ++i) y[i] = dot(m_.row(i), x);
        return y;
    }

    /// x^T M y
    double bilinear(std::span<const double> x, std::span<const double> y) const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) s += x[i] * dot(m_.row(i), y);
        return s;
    }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) { return combine(a, b, 1.0); }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) { return combine(a, b, -1.0); }

    friend SymMatrix operator*(double s, const SymMatrix& a) {
        Matrix m = a.m_;
        for (std::size_t i = 0; i < a.dim(); ++i)
            for (std::size_t j = 0; j < a.dim(); ++j) m(i, j) *= s;
        return SymMatrix(m);
    }

private:
    static SymMatrix combine(const SymMatrix& a, const SymMatrix& b, double sign) {
        if (a.dim() != b.dim()) throw DimensionError("SymMatrix arithmetic", a.dim(), b.dim());
        Matrix m = a.m_;
        for (std::size_t i = 0; i < a.dim(); ++i)
            for (std::size_t j = 0; j < a.dim(); ++j) m(i, j) += sign * b(i, j);
        return SymMatrix(m);
    }

    Matrix m_;
};

/// Symmetrized product (A B + (A B)^T) / 2; exact when A and B commute.
inline SymMatrix sym_product(const SymMatrix& a, const SymMatrix& b) {
    return SymMatrix(a.matrix() * b.matrix());
}

struct EigenDecomposition {
    Vector values;   ///< ascending
    Matrix vectors;  ///< column i pairs with values[i]
};

inline constexpr int kJacobiMaxSweeps = 100;

/// Cyclic Jacobi eigensolver. Stops once the off-diagonal Frobenius mass is
/// at most 1e-14 * ||A||_F.
inline EigenDecomposition eig_sym(const SymMatrix& m) {
    const std::size_t d = m.dim();
    Matrix a = m.matrix();
    Matrix v = Matrix::identity(d);
    const double tol = 1e-14 * m.frobenius_norm();

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    double off = off_norm();
    int sweep = 0;
    for (; sweep < kJacobiMaxSweeps && off > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        off = off_norm();
    }
    if (off > tol)
        throw ConvergenceError("eig_sym: Jacobi did not converge in " + std::to_string(kJacobiMaxSweeps) +
                                   " sweeps, off-diagonal norm",
                               off);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    EigenDecomposition out{Vector(d), Matrix(d, d)};
    for (std::size_t c = 0; c < d; ++c) {
        out.values[c] = a(order[c], order[c]);
        for (std::size_t k = 0; k < d; ++k) out.vectors(k, c) = v(k, order[c]);
    }
    return out;
}

inline double min_eigenvalue(const SymMatrix& m) { return eig_sym(m).values.front(); }
inline double max_eigenvalue(const SymMatrix& m) { return eig_sym(m).values.back(); }

/// Q f(Lambda) Q^T for a scalar function f applied to each eigenvalue.
template <class F>
SymMatrix spectral_apply(const EigenDecomposition& e, F&& f) {
    const std::size_t d = e.values.size();
    Matrix out(d, d);
    for (std::size_t c = 0; c < d; ++c) {
        const double fv = f(e.values[c]);
        for (std::size_t i = 0; i < d; ++i) {
            const double qi = e.vectors(i, c) * fv;
            for (std::size_t j = 0; j < d; ++j) out(i, j) += qi * e.vectors(j, c);
        }
    }
    return SymMatrix(out);
}

template <class F>
SymMatrix spectral_apply(const SymMatrix& m, F&& f) {
    return spectral_apply(eig_sym(m), std::forward<F>(f));
}

inline constexpr double kSingularThreshold = 1e-12;

/// Lower Cholesky factor; the caller guarantees positive definiteness.
inline Matrix cholesky(const SymMatrix& m) {
    const std::size_t d = m.dim();
    Matrix l(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double diag = m(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0)) throw SingularMatrixError("cholesky: matrix is not positive definite");
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

/// Inverse of a symmetric positive-definite matrix, via Cholesky.
inline SymMatrix inverse_spd(const SymMatrix& m) {
    const double lo = min_eigenvalue(m);
    if (lo <= kSingularThreshold)
        throw SingularMatrixError("inverse_spd: smallest eigenvalue " + std::to_string(lo) + " <= 1e-12");
    const std::size_t d = m.dim();
    const Matrix l = cholesky(m);
    // Solve L L^T X = I column by column.
    Matrix x(d, d);
    Vector y(d);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
            y[i] = s / l(i, i);
        }
        for (std::size_t ii = d; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < d; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return SymMatrix(x);
}

/// Principal square root of a PSD matrix. Eigenvalues in [-1e-12, 0) are
/// treated as zero.
inline SymMatrix sqrt_spd(const SymMatrix& m) {
    const EigenDecomposition e = eig_sym(m);
    if (e.values.front() < -kSingularThreshold)
        throw NotPsdError("sqrt_spd: negative eigenvalue " + std::to_string(e.values.front()));
    return spectral_apply(e, [](double v) { return std::sqrt(std::max(v, 0.0)); });
}

}  // namespace soo
