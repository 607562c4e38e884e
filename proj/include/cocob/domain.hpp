#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "cocob/error.hpp"
#include "cocob/linalg.hpp"
#include "cocob/rng.hpp"

namespace cocob {

/// Dense user index in [0, m).
using UserId = std::size_t;

struct Arm {
    std::size_t item_id = 0;
    Vec context;
};

/// The J arms offered at one round. `round` is the 1-based step t that enters
/// the ln(1 + t) exploration width.
struct CandidateSet {
    std::size_t round = 0;
    std::vector<Arm> arms;

    std::size_t size() const noexcept { return arms.size(); }
};

/// Ordered top-K selection: positions into the CandidateSet plus their scores.
/// `neighbors` records the users whose models produced the scores (empty when
/// a policy has no notion of neighborhood); CoCoB's update credits them.
struct RecommendationList {
    std::vector<std::size_t> arm_indices;
    std::vector<double> scores;
    std::vector<UserId> neighbors;

    std::size_t size() const noexcept { return arm_indices.size(); }
};

struct RoundFeedback {
    std::vector<int> per_arm_rewards;
    double mean_reward = 0.0;
    Vec mean_context;
};

/// Averaged reward and context of the K selected arms.
inline RoundFeedback mean_feedback(std::span<const int> rewards, std::span<const Vec> contexts) {
    if (rewards.empty() || contexts.empty()) throw invalid_input("mean_feedback: empty selection");
    if (rewards.size() != contexts.size()) throw invalid_input("mean_feedback: rewards/contexts length mismatch");
    RoundFeedback fb;
    fb.per_arm_rewards.assign(rewards.begin(), rewards.end());
    const double k = static_cast<double>(rewards.size());
    int hits = 0;
    for (int r : rewards) {
        if (r != 0 && r != 1) throw invalid_input("mean_feedback: rewards must be 0 or 1");
        hits += r;
    }
    fb.mean_reward = static_cast<double>(hits) / k;
    fb.mean_context.assign(contexts.front().size(), 0.0);
    for (const Vec& x : contexts) {
        if (x.size() != fb.mean_context.size()) throw invalid_input("mean_feedback: context dimension mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) fb.mean_context[i] += x[i];
    }
    for (double& v : fb.mean_context) v /= k;
    return fb;
}

/// Selected contexts of `list` in selection order.
inline std::vector<Vec> selected_contexts(const CandidateSet& c, const RecommendationList& list) {
    std::vector<Vec> out;
    out.reserve(list.size());
    for (std::size_t idx : list.arm_indices) out.push_back(c.arms[idx].context);
    return out;
}

/// Indices of the K largest scores, descending; ties go to the smaller index.
inline std::vector<std::size_t> top_k_by_score(std::span<const double> scores, std::size_t k) {
    if (k < 1 || k > scores.size()) throw invalid_input("top_k_by_score: need 1 <= K <= J");
    if (!all_finite(scores)) throw invalid_input("top_k_by_score: non-finite score");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

inline RecommendationList list_from_scores(std::span<const double> scores, std::size_t k) {
    RecommendationList out;
    out.arm_indices = top_k_by_score(scores, k);
    for (std::size_t i : out.arm_indices) out.scores.push_back(scores[i]);
    return out;
}

/// Uniform harness over CoCoB and the baselines. recommend() is const and may
/// run concurrently between updates; update() must be called exclusively.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string_view name() const = 0;
    virtual RecommendationList recommend(UserId user, const CandidateSet& candidates, Rng& rng) const = 0;
    virtual void update(UserId user, const CandidateSet& candidates, const RecommendationList& list,
                        const RoundFeedback& feedback) = 0;
};

}  // namespace cocob
