#pragma once

// Small dense linear algebra for d-dimensional ridge models. Dimensions stay
// in the tens, so everything is plain row-major storage and naive loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cocob/error.hpp"

namespace cocob {

using Vec = std::vector<double>;

/// Square d x d matrix, row-major.
class Mat {
public:
    Mat() = default;
    explicit Mat(std::size_t d, double fill = 0.0) : d_(d), data_(d * d, fill) {}

    static Mat identity(std::size_t d) {
        Mat m(d);
        for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat diagonal(std::span<const double> diag) {
        Mat m(diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    std::size_t dim() const noexcept { return d_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * d_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * d_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * d_, d_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * d_, d_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Mat& operator+=(const Mat& o) {
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Mat& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t d_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Vec matvec(const Mat& a, std::span<const double> x) {
    Vec y(a.dim(), 0.0);
    for (std::size_t i = 0; i < a.dim(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    const std::size_t d = a.dim();
    Mat c(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < d; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

/// Max-abs entry.
inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Max-abs entry of A - A^T.
inline double asymmetry(const Mat& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = i + 1; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - a(j, i)));
    return m;
}

inline void symmetrize(Mat& a) {
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = i + 1; j < a.dim(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
}

/// a += s * x x^T
inline void add_outer(Mat& a, std::span<const double> x, double s = 1.0) {
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double sxi = s * x[i];
        for (std::size_t j = 0; j < a.dim(); ++j) a(i, j) += sxi * x[j];
    }
}

/// In-place Sherman-Morrison: a_inv <- (A + x x^T)^{-1}, then re-symmetrized.
inline void rank1_inverse_update_inplace(Mat& a_inv, std::span<const double> x) {
    if (x.size() != a_inv.dim()) throw invalid_input("rank1_inverse_update: dimension mismatch");
    if (!all_finite(x) || !all_finite(a_inv.data())) throw invalid_input("rank1_inverse_update: non-finite input");
    const Vec ax = matvec(a_inv, x);
    const double denom = 1.0 + dot(x, ax);
    if (!(denom > 0.0)) throw numerical_degeneracy("rank1_inverse_update: non-positive denominator");
    add_outer(a_inv, ax, -1.0 / denom);
    symmetrize(a_inv);
}

inline Mat rank1_inverse_update(Mat a_inv, std::span<const double> x) {
    rank1_inverse_update_inplace(a_inv, x);
    return a_inv;
}

/// Lower-triangular Cholesky factor L with M = L L^T.
class Cholesky {
public:
    explicit Cholesky(const Mat& m) : l_(m.dim()) {
        if (!all_finite(m.data())) throw invalid_input("cholesky: non-finite matrix");
        const std::size_t d = m.dim();
        for (std::size_t j = 0; j < d; ++j) {
            double diag = m(j, j);
            for (std::size_t k = 0; k < j; ++k) diag -= l_(j, k) * l_(j, k);
            if (!(diag > 0.0)) throw numerical_degeneracy("cholesky: matrix is not positive definite");
            const double ljj = std::sqrt(diag);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < d; ++i) {
                double s = m(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / ljj;
            }
        }
    }

    std::size_t dim() const noexcept { return l_.dim(); }

    /// y with L y = b.
    Vec forward(std::span<const double> b) const {
        const std::size_t d = dim();
        Vec y(b.begin(), b.end());
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
            y[i] /= l_(i, i);
        }
        return y;
    }

    Vec solve(std::span<const double> b) const {
        if (b.size() != dim()) throw invalid_input("cholesky solve: dimension mismatch");
        Vec z = forward(b);
        for (std::size_t ii = dim(); ii-- > 0;) {
            for (std::size_t k = ii + 1; k < dim(); ++k) z[ii] -= l_(k, ii) * z[k];
            z[ii] /= l_(ii, ii);
        }
        return z;
    }

    /// x^T M^{-1} x = |L^{-1} x|^2, never negative.
    double inverse_quad(std::span<const double> x) const {
        const Vec y = forward(x);
        return dot(y, y);
    }

    const Mat& factor() const noexcept { return l_; }

private:
    Mat l_;
};

inline Vec solve_spd(const Mat& m, std::span<const double> b) {
    if (!all_finite(b)) throw invalid_input("solve_spd: non-finite right-hand side");
    return Cholesky(m).solve(b);
}

/// Tolerance below zero for a quadratic form that is still rounding noise.
inline constexpr double quad_clamp_tolerance = 1e-12;

/// x^T A x for symmetric PD A. Values in [-1e-12, 0) are clamped to 0; anything
/// more negative is returned unchanged so the caller can reject it.
inline double quad_form(const Mat& a_inv, std::span<const double> x) {
    if (x.size() != a_inv.dim()) throw invalid_input("quad_form: dimension mismatch");
    if (!all_finite(x) || !all_finite(a_inv.data())) throw invalid_input("quad_form: non-finite input");
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) q += x[i] * dot(a_inv.row(i), x);
    if (q < 0.0 && q >= -quad_clamp_tolerance) q = 0.0;
    return q;
}

}  // namespace cocob
