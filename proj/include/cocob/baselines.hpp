#pragma once

// Comparison policies: per-user top-K LinUCB, a DynUCB-style k-means
// clustering bandit, a CAB-style context-aware neighborhood bandit and a
// uniform random control. These are comparison-grade, not reproductions of
// the original methods in every detail.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include "cocob/domain.hpp"
#include "cocob/error.hpp"
#include "cocob/linalg.hpp"
#include "cocob/user_model.hpp"

namespace cocob {

struct LinearBanditConfig {
    double e = 0.1;
    std::size_t k = 10;

    void validate() const {
        if (!(e >= 0.0)) throw invalid_input("exploration e must be non-negative");
        if (k < 1) throw invalid_input("K must be at least 1");
    }
};

/// Independent ridge UCB per user, top-K by score.
class LinUcb final : public Policy {
public:
    LinUcb(std::size_t m, std::size_t d, LinearBanditConfig config) : config_(config), models_(m, UserModel(d)) {
        config_.validate();
    }

    std::string_view name() const override { return "linucb"; }

    RecommendationList recommend(UserId user, const CandidateSet& c, Rng&) const override {
        const UserModel& um = models_.at(user);
        std::vector<double> scores(c.size());
        for (std::size_t j = 0; j < c.size(); ++j) scores[j] = um.score(c.arms[j].context, config_.e, c.round);
        RecommendationList out = list_from_scores(scores, config_.k);
        out.neighbors = {user};
        return out;
    }

    void update(UserId user, const CandidateSet&, const RecommendationList&, const RoundFeedback& fb) override {
        models_.at(user).observe(fb.mean_context, fb.mean_reward);
    }

    const std::vector<UserModel>& models() const noexcept { return models_; }

private:
    LinearBanditConfig config_;
    std::vector<UserModel> models_;
};

/// k-means style clustering bandit. Users start round-robin over clusters;
/// after each update the served user moves to the cluster with the nearest
/// centroid (mean w of members), staying put on ties. A cluster emptied by a
/// move is reseeded with the user farthest from its own cluster's centroid.
/// Cluster model: M = sum(M_v) - (n - 1) I, b = sum(b_v).
class DynUcb final : public Policy {
public:
    DynUcb(std::size_t m, std::size_t d, std::size_t n_clusters, LinearBanditConfig config)
        : config_(config), models_(m, UserModel(d)), assignment_(m) {
        config_.validate();
        if (n_clusters < 1 || n_clusters > m) throw invalid_input("dynucb: need 1 <= n_clusters <= m");
        n_clusters_ = n_clusters;
        for (UserId u = 0; u < m; ++u) assignment_[u] = u % n_clusters;
    }

    std::string_view name() const override { return "dynucb"; }

    RecommendationList recommend(UserId user, const CandidateSet& c, Rng&) const override {
        const std::vector<UserId> members = members_of(assignment_.at(user));
        std::vector<double> scores(c.size());
        if (members.size() == 1) {
            const UserModel& um = models_[members.front()];
            for (std::size_t j = 0; j < c.size(); ++j) scores[j] = um.score(c.arms[j].context, config_.e, c.round);
        } else {
            const auto [gram, b] = cluster_model(members);
            const Vec w = solve_spd(gram, b);
            const Cholesky chol(gram);
            for (std::size_t j = 0; j < c.size(); ++j)
                scores[j] = score_arm(w, chol, c.arms[j].context, config_.e, c.round);
        }
        RecommendationList out = list_from_scores(scores, config_.k);
        out.neighbors = members;
        return out;
    }

    void update(UserId user, const CandidateSet&, const RecommendationList&, const RoundFeedback& fb) override {
        models_.at(user).observe(fb.mean_context, fb.mean_reward);
        reassign(user);
    }

    /// Cluster id of `user`.
    std::size_t cluster_of(UserId user) const { return assignment_.at(user); }
    std::size_t clusters() const noexcept { return n_clusters_; }
    const std::vector<UserModel>& models() const noexcept { return models_; }

    /// Moves `user` to its nearest centroid and repairs emptied clusters.
    void reassign(UserId user) {
        const std::vector<Vec> cents = centroids();
        const std::size_t current = assignment_[user];
        std::size_t best = current;
        double best_dist = distance2(models_[user].w, cents[current]);
        for (std::size_t c = 0; c < n_clusters_; ++c) {
            if (cents[c].empty()) continue;
            const double dist = distance2(models_[user].w, cents[c]);
            if (dist < best_dist) {
                best = c;
                best_dist = dist;
            }
        }
        assignment_[user] = best;
        if (best != current && members_of(current).empty()) reseed(current);
    }

    std::vector<UserId> members_of(std::size_t cluster) const {
        std::vector<UserId> out;
        for (UserId u = 0; u < assignment_.size(); ++u)
            if (assignment_[u] == cluster) out.push_back(u);
        return out;
    }

    /// Mean w per cluster; empty vector for an empty cluster.
    std::vector<Vec> centroids() const {
        const std::size_t d = models_.front().dim();
        std::vector<Vec> sum(n_clusters_, Vec(d, 0.0));
        std::vector<std::size_t> count(n_clusters_, 0);
        for (UserId u = 0; u < assignment_.size(); ++u) {
            const std::size_t c = assignment_[u];
            ++count[c];
            for (std::size_t i = 0; i < d; ++i) sum[c][i] += models_[u].w[i];
        }
        for (std::size_t c = 0; c < n_clusters_; ++c) {
            if (count[c] == 0) {
                sum[c].clear();
                continue;
            }
            for (double& v : sum[c]) v /= static_cast<double>(count[c]);
        }
        return sum;
    }

    std::pair<Mat, Vec> cluster_model(std::span<const UserId> members) const {
        const std::size_t d = models_.front().dim();
        Mat gram(d);
        Vec b(d, 0.0);
        for (UserId v : members) {
            gram += models_[v].gram;
            for (std::size_t i = 0; i < d; ++i) b[i] += models_[v].b[i];
        }
        const double extra = static_cast<double>(members.size()) - 1.0;
        for (std::size_t i = 0; i < d; ++i) gram(i, i) -= extra;
        return {gram, b};
    }

private:
    static double distance2(std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    }

    void reseed(std::size_t empty_cluster) {
        const std::vector<Vec> cents = centroids();
        std::vector<std::size_t> count(n_clusters_, 0);
        for (std::size_t c : assignment_) ++count[c];
        UserId pick = assignment_.size();
        double pick_dist = -1.0;
        for (UserId u = 0; u < assignment_.size(); ++u) {
            const std::size_t c = assignment_[u];
            if (count[c] < 2) continue;
            const double dist = distance2(models_[u].w, cents[c]);
            if (dist > pick_dist) {
                pick = u;
                pick_dist = dist;
            }
        }
        if (pick < assignment_.size()) assignment_[pick] = empty_cluster;
    }

    LinearBanditConfig config_;
    std::vector<UserModel> models_;
    std::vector<std::size_t> assignment_;
    std::size_t n_clusters_ = 1;
};

/// Context-aware neighborhoods: for arm x, v joins u's neighborhood iff
/// |w_u.x - w_v.x| <= CB_u(x) + CB_v(x), CB_w(x) = e sqrt(x^T M_w^{-1} x ln(1+t)).
/// The arm is scored with the neighborhood's mean estimate plus mean width.
/// Neighborhoods are rebuilt per arm, so a round costs O(m J d^2).
class Cab final : public Policy {
public:
    Cab(std::size_t m, std::size_t d, LinearBanditConfig config) : config_(config), models_(m, UserModel(d)) {
        config_.validate();
    }

    std::string_view name() const override { return "cab"; }

    /// Members of u's neighborhood for context x at round t.
    std::vector<UserId> neighbors(UserId u, std::span<const double> x, std::size_t t) const {
        const double est_u = dot(models_.at(u).w, x);
        const double cb_u = models_[u].width(x, config_.e, t);
        std::vector<UserId> out;
        for (UserId v = 0; v < models_.size(); ++v) {
            const double est_v = dot(models_[v].w, x);
            const double cb_v = models_[v].width(x, config_.e, t);
            if (std::abs(est_u - est_v) <= cb_u + cb_v) out.push_back(v);
        }
        return out;
    }

    RecommendationList recommend(UserId user, const CandidateSet& c, Rng&) const override {
        std::vector<double> scores(c.size());
        for (std::size_t j = 0; j < c.size(); ++j) {
            const Vec& x = c.arms[j].context;
            const std::vector<UserId> n = neighbors(user, x, c.round);
            double est = 0.0, cb = 0.0;
            for (UserId v : n) {
                est += dot(models_[v].w, x);
                cb += models_[v].width(x, config_.e, c.round);
            }
            scores[j] = (est + cb) / static_cast<double>(n.size());
        }
        RecommendationList out = list_from_scores(scores, config_.k);
        out.neighbors = {user};
        return out;
    }

    void update(UserId user, const CandidateSet&, const RecommendationList&, const RoundFeedback& fb) override {
        models_.at(user).observe(fb.mean_context, fb.mean_reward);
    }

    const std::vector<UserModel>& models() const noexcept { return models_; }
    std::vector<UserModel>& models() noexcept { return models_; }

private:
    LinearBanditConfig config_;
    std::vector<UserModel> models_;
};

/// K distinct positions drawn without replacement from [0, J).
inline RecommendationList random_recommend(const CandidateSet& c, std::size_t k, Rng& rng) {
    if (k < 1 || k > c.size()) throw invalid_input("random_recommend: need 1 <= K <= J");
    RecommendationList out;
    out.arm_indices = sample_without_replacement(c.size(), k, rng);
    out.scores.assign(k, 0.0);
    return out;
}

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::size_t k) : k_(k) {
        if (k < 1) throw invalid_input("random: K must be at least 1");
    }

    std::string_view name() const override { return "random"; }

    RecommendationList recommend(UserId, const CandidateSet& c, Rng& rng) const override {
        return random_recommend(c, k_, rng);
    }

    void update(UserId, const CandidateSet&, const RecommendationList&, const RoundFeedback&) override {}

private:
    std::size_t k_;
};

}  // namespace cocob
