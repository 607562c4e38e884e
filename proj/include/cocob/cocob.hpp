#pragma once

// CoCoB: a Beta-posterior user-bandit picks the neighborhood of the served
// user, an aggregated linear-UCB item-bandit ranks the candidates, and the
// update step refines both the user's ridge model and the pairwise
// similarity posteriors of everyone who took part in the round.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cocob/domain.hpp"
#include "cocob/error.hpp"
#include "cocob/linalg.hpp"
#include "cocob/rng.hpp"
#include "cocob/user_model.hpp"

namespace cocob {

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

/// One draw from Beta(alpha, beta), strictly inside (0, 1).
inline double sample_similarity(BetaParams p, Rng& rng) {
    if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.beta))
        throw invalid_input("sample_similarity: Beta parameters must be positive");
    const double x = std::gamma_distribution<double>(p.alpha, 1.0)(rng);
    const double y = std::gamma_distribution<double>(p.beta, 1.0)(rng);
    double s = x / (x + y);
    if (!(s > 0.0)) s = std::numeric_limits<double>::min();
    if (!(s < 1.0)) s = std::nextafter(1.0, 0.0);
    return s;
}

/// Beta parameters over unordered user pairs {u, v}, u == v included. One
/// entry per pair, so alpha(v|u) == alpha(u|v) holds structurally.
class SimilarityTable {
public:
    SimilarityTable() = default;
    SimilarityTable(std::size_t m, BetaParams prior) : m_(m), pairs_(m * (m + 1) / 2, prior) {}

    std::size_t users() const noexcept { return m_; }

    const BetaParams& operator()(UserId u, UserId v) const { return pairs_[index(u, v)]; }
    BetaParams& operator()(UserId u, UserId v) { return pairs_[index(u, v)]; }

    std::span<const BetaParams> entries() const noexcept { return pairs_; }
    std::span<BetaParams> entries() noexcept { return pairs_; }

    friend bool operator==(const SimilarityTable&, const SimilarityTable&) = default;

private:
    std::size_t index(UserId u, UserId v) const {
        if (u >= m_ || v >= m_) throw invalid_input("SimilarityTable: user index out of range");
        if (u > v) std::swap(u, v);
        return v * (v + 1) / 2 + u;
    }

    std::size_t m_ = 0;
    std::vector<BetaParams> pairs_;
};

struct NeighborSet {
    std::vector<UserId> members;
    std::size_t round = 0;
};

/// Draws p(v|u) for every v in [0, m) in index order and keeps v iff
/// p >= gamma. Falls back to {u} when nobody qualifies.
inline NeighborSet find_neighbors(UserId u, const SimilarityTable& table, double gamma, Rng& rng,
                                  std::size_t round = 0) {
    NeighborSet out{{}, round};
    for (UserId v = 0; v < table.users(); ++v)
        if (sample_similarity(table(u, v), rng) >= gamma) out.members.push_back(v);
    if (out.members.empty()) out.members.push_back(u);
    return out;
}

/// Mean Gram matrix, mean b, and w = M^{-1} b over a neighborhood.
struct Aggregate {
    Mat gram;
    Vec b;
    Vec w;
};

inline Aggregate aggregate_neighborhood(std::span<const UserId> neighbors, std::span<const UserModel> models) {
    if (neighbors.empty()) throw invalid_input("aggregate_neighborhood: empty neighborhood");
    if (neighbors.size() == 1) {
        const UserModel& m = models[neighbors.front()];
        return {m.gram, m.b, m.w};
    }
    const std::size_t d = models[neighbors.front()].dim();
    Aggregate agg{Mat(d), Vec(d, 0.0), {}};
    for (UserId v : neighbors) {
        agg.gram += models[v].gram;
        for (std::size_t i = 0; i < d; ++i) agg.b[i] += models[v].b[i];
    }
    const double inv_n = 1.0 / static_cast<double>(neighbors.size());
    agg.gram *= inv_n;
    for (double& x : agg.b) x *= inv_n;
    agg.w = solve_spd(agg.gram, agg.b);
    return agg;
}

struct CocobConfig {
    double gamma = 0.8;
    double alpha0 = 15.0;
    double beta0 = 15.0;
    double e = 0.1;
    std::size_t k = 10;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw invalid_input("cocob: gamma must lie in [0, 1]");
        if (!(alpha0 > 0.0) || !(beta0 > 0.0)) throw invalid_input("cocob: Beta prior must be positive");
        if (!(e >= 0.0)) throw invalid_input("cocob: exploration e must be non-negative");
        if (k < 1) throw invalid_input("cocob: K must be at least 1");
    }
};

class Cocob final : public Policy {
public:
    Cocob(std::size_t m, std::size_t d, CocobConfig config)
        : config_(config), models_(m, UserModel(d)), table_(m, {config.alpha0, config.beta0}) {
        config_.validate();
        if (m == 0 || d == 0) throw invalid_input("cocob: need at least one user and one feature");
    }

    std::string_view name() const override { return "cocob"; }

    RecommendationList recommend(UserId user, const CandidateSet& candidates, Rng& rng) const override {
        check_user(user);
        NeighborSet n = find_neighbors(user, table_, config_.gamma, rng, candidates.round);
        return recommend_with(user, candidates, n);
    }

    /// Item-bandit step for a given neighborhood.
    RecommendationList recommend_with(UserId user, const CandidateSet& candidates, const NeighborSet& n) const {
        check_user(user);
        std::vector<double> scores(candidates.size());
        const std::size_t t = candidates.round;
        if (n.members.size() == 1) {
            const UserModel& only = models_[n.members.front()];
            for (std::size_t j = 0; j < scores.size(); ++j)
                scores[j] = only.score(candidates.arms[j].context, config_.e, t);
        } else {
            const Aggregate agg = aggregate_neighborhood(n.members, models_);
            const Cholesky chol(agg.gram);
            for (std::size_t j = 0; j < scores.size(); ++j)
                scores[j] = score_arm(agg.w, chol, candidates.arms[j].context, config_.e, t);
        }
        RecommendationList out = list_from_scores(scores, config_.k);
        out.neighbors = n.members;
        return out;
    }

    void update(UserId user, const CandidateSet&, const RecommendationList& list,
                const RoundFeedback& feedback) override {
        update(user, list.neighbors, feedback);
    }

    /// Ridge update of `user` only; every neighbor's pair posterior gets one
    /// success (mean reward > 0) or one failure.
    void update(UserId user, std::span<const UserId> neighbors, const RoundFeedback& feedback) {
        check_user(user);
        models_[user].observe(feedback.mean_context, feedback.mean_reward);
        const bool success = feedback.mean_reward > 0.0;
        for (UserId v : neighbors) {
            BetaParams& p = table_(user, v);
            if (success)
                p.alpha += 1.0;
            else
                p.beta += 1.0;
        }
    }

    const CocobConfig& config() const noexcept { return config_; }
    std::size_t users() const noexcept { return models_.size(); }
    std::size_t dim() const noexcept { return models_.front().dim(); }
    const std::vector<UserModel>& models() const noexcept { return models_; }
    const SimilarityTable& similarity() const noexcept { return table_; }
    SimilarityTable& similarity() noexcept { return table_; }

    void save(std::ostream& os) const;
    static Cocob load(std::istream& is);

    friend bool operator==(const Cocob& a, const Cocob& b) {
        return a.config_.gamma == b.config_.gamma && a.config_.alpha0 == b.config_.alpha0 &&
               a.config_.beta0 == b.config_.beta0 && a.config_.e == b.config_.e && a.config_.k == b.config_.k &&
               a.models_ == b.models_ && a.table_ == b.table_;
    }

private:
    void check_user(UserId u) const {
        if (u >= models_.size()) throw invalid_input("cocob: user index out of range");
    }

    CocobConfig config_;
    std::vector<UserModel> models_;
    SimilarityTable table_;
};

// Snapshot: whitespace-separated text, doubles in hexadecimal notation so the
// round trip is bit-exact.
//
//   cocob-snapshot 1
//   <m> <d> <K>
//   <gamma> <alpha0> <beta0> <e>
//   m x { gram (d*d)  gram_inv (d*d)  b (d)  w (d) }
//   m(m+1)/2 x { alpha beta }
//   end

namespace detail {

inline void put_hex(std::ostream& os, double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    os.write(buf, r.ptr - buf);
}

inline double get_hex(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw parse_error("snapshot: unexpected end of input");
    double v = 0.0;
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
    if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) throw parse_error("snapshot: bad number '" + tok + "'");
    return v;
}

inline void put_values(std::ostream& os, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ' ';
        put_hex(os, v[i]);
    }
    os << '\n';
}

inline void get_values(std::istream& is, std::span<double> v) {
    for (double& x : v) x = get_hex(is);
}

}  // namespace detail

inline constexpr int cocob_snapshot_version = 1;

inline void Cocob::save(std::ostream& os) const {
    os << "cocob-snapshot " << cocob_snapshot_version << '\n';
    os << users() << ' ' << dim() << ' ' << config_.k << '\n';
    const double hdr[] = {config_.gamma, config_.alpha0, config_.beta0, config_.e};
    detail::put_values(os, hdr);
    for (const UserModel& m : models_) {
        detail::put_values(os, m.gram.data());
        detail::put_values(os, m.gram_inv.data());
        detail::put_values(os, m.b);
        detail::put_values(os, m.w);
    }
    for (const BetaParams& p : table_.entries()) {
        const double ab[] = {p.alpha, p.beta};
        detail::put_values(os, ab);
    }
    os << "end\n";
}

inline Cocob Cocob::load(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "cocob-snapshot") throw parse_error("snapshot: missing header");
    if (version != cocob_snapshot_version) throw parse_error("snapshot: unsupported version " + std::to_string(version));
    std::size_t m = 0, d = 0;
    CocobConfig cfg;
    if (!(is >> m >> d >> cfg.k)) throw parse_error("snapshot: bad dimensions");
    cfg.gamma = detail::get_hex(is);
    cfg.alpha0 = detail::get_hex(is);
    cfg.beta0 = detail::get_hex(is);
    cfg.e = detail::get_hex(is);
    Cocob c(m, d, cfg);
    for (UserModel& um : c.models_) {
        detail::get_values(is, um.gram.data());
        detail::get_values(is, um.gram_inv.data());
        detail::get_values(is, um.b);
        detail::get_values(is, um.w);
    }
    for (BetaParams& p : c.table_.entries()) {
        p.alpha = detail::get_hex(is);
        p.beta = detail::get_hex(is);
    }
    std::string tail;
    if (!(is >> tail) || tail != "end") throw parse_error("snapshot: missing trailer");
    return c;
}

}  // namespace cocob
