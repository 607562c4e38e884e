#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "cocob/error.hpp"
#include "cocob/linalg.hpp"

namespace cocob {

/// e * sqrt(quad * ln(1 + t)). `quad` is x^T M^{-1} x as returned by quad_form
/// or Cholesky::inverse_quad.
inline double exploration_bonus(double quad, double e, std::size_t t) {
    if (quad < -quad_clamp_tolerance) throw numerical_degeneracy("exploration width: negative radicand");
    if (quad < 0.0) quad = 0.0;
    return e * std::sqrt(quad * std::log1p(static_cast<double>(t)));
}

/// Upper-confidence score  w^T x + e sqrt(x^T M^{-1} x ln(1 + t)).
inline double score_arm(std::span<const double> w, const Cholesky& m_hat, std::span<const double> x, double e,
                        std::size_t t) {
    return dot(w, x) + exploration_bonus(m_hat.inverse_quad(x), e, t);
}

inline double score_arm(std::span<const double> w, const Mat& m_hat, std::span<const double> x, double e,
                        std::size_t t) {
    return score_arm(w, Cholesky(m_hat), x, e, t);
}

/// Per-user ridge model: Gram matrix M (starts at I), its maintained inverse,
/// reward-weighted feature sum b (starts at 0) and the proxy w = M^{-1} b.
struct UserModel {
    Mat gram;
    Mat gram_inv;
    Vec b;
    Vec w;

    UserModel() = default;
    explicit UserModel(std::size_t d) : gram(Mat::identity(d)), gram_inv(Mat::identity(d)), b(d, 0.0), w(d, 0.0) {}

    std::size_t dim() const noexcept { return b.size(); }

    /// M += x x^T, b += r x, inverse via Sherman-Morrison, w re-solved.
    void observe(std::span<const double> x, double reward) {
        if (x.size() != dim()) throw invalid_input("UserModel::observe: dimension mismatch");
        if (!all_finite(x) || !std::isfinite(reward)) throw invalid_input("UserModel::observe: non-finite input");
        add_outer(gram, x);
        rank1_inverse_update_inplace(gram_inv, x);
        for (std::size_t i = 0; i < dim(); ++i) b[i] += reward * x[i];
        w = solve_spd(gram, b);
    }

    /// Score using the maintained inverse; the |N| = 1 fast path.
    double score(std::span<const double> x, double e, std::size_t t) const {
        return dot(w, x) + exploration_bonus(quad_form(gram_inv, x), e, t);
    }

    /// Confidence width alone, e sqrt(x^T M^{-1} x ln(1 + t)).
    double width(std::span<const double> x, double e, std::size_t t) const {
        return exploration_bonus(quad_form(gram_inv, x), e, t);
    }

    friend bool operator==(const UserModel&, const UserModel&) = default;
};

}  // namespace cocob
