#include "causalbound/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace causalbound {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("cholesky: matrix not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw std::runtime_error("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

namespace {

// LU with partial pivoting; returns permuted factors in-place.
void lu_decompose(Matrix& a, std::vector<std::size_t>& perm) {
    const std::size_t n = a.rows();
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(a(i, k)) > best) {
                best = std::fabs(a(i, k));
                piv = i;
            }
        if (best == 0.0) throw std::runtime_error("solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(perm[k], perm[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            a(i, k) /= a(k, k);
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= a(i, k) * a(k, j);
        }
    }
}

std::vector<double> lu_solve(const Matrix& lu, const std::vector<std::size_t>& perm,
                             std::span<const double> b) {
    const std::size_t n = lu.rows();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
        x[i] /= lu(i, i);
    }
    return x;
}

}  // namespace

std::vector<double> solve(const Matrix& a, std::span<const double> b) {
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw std::invalid_argument("solve: dimension mismatch");
    Matrix lu = a;
    std::vector<std::size_t> perm;
    lu_decompose(lu, perm);
    return lu_solve(lu, perm, b);
}

Matrix inverse(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("inverse: matrix not square");
    const std::size_t n = a.rows();
    Matrix lu = a;
    std::vector<std::size_t> perm;
    lu_decompose(lu, perm);
    Matrix out(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        auto col = lu_solve(lu, perm, e);
        for (std::size_t i = 0; i < n; ++i) out(i, j) = col[i];
    }
    return out;
}

double column_mean(const Matrix& a, std::size_t c) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, c);
    return s / static_cast<double>(a.rows());
}

double column_std(const Matrix& a, std::size_t c) {
    const double m = column_mean(a, c);
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double d = a(i, c) - m;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.rows() > 1 ? a.rows() - 1 : 1));
}

std::vector<double> column_means(const Matrix& a) {
    std::vector<double> out(a.cols());
    for (std::size_t c = 0; c < a.cols(); ++c) out[c] = column_mean(a, c);
    return out;
}

std::vector<double> least_squares(const Matrix& a, std::span<const double> y) {
    if (a.rows() != y.size()) throw std::invalid_argument("least_squares: row mismatch");
    const std::size_t k = a.cols();
    Matrix ata(k, k);
    std::vector<double> aty(k, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t r = 0; r < k; ++r) {
            aty[r] += a(i, r) * y[i];
            for (std::size_t c = 0; c < k; ++c) ata(r, c) += a(i, r) * a(i, c);
        }
    }
    // small ridge keeps near-collinear bases solvable
    for (std::size_t r = 0; r < k; ++r) ata(r, r) += 1e-9;
    return solve(ata, aty);
}

}  // namespace causalbound
