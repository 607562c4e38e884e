#pragma once

// Replayer evaluation over historical interaction logs. Each logged event
// becomes one round: the logged item plus J-1 random pool items form the
// candidate set, the policy picks K, every pick inside the user's interacted
// set S_u earns reward 1, and the policy is updated with that feedback.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cocob/domain.hpp"
#include "cocob/error.hpp"
#include "cocob/io.hpp"
#include "cocob/rng.hpp"
#include "cocob/synthetic.hpp"

namespace cocob {

struct Interaction {
    UserId user = 0;
    std::size_t item = 0;
    int weight = 1;
    std::int64_t timestamp = 0;
};

/// Which events define S_u.
enum class RelevantSet {
    full,     // every logged item of the user
    holdout,  // only the chronologically last fraction of the user's events
};

class InteractionLog {
public:
    InteractionLog() = default;

    /// `events` are stably sorted by timestamp; `item_contexts` has one row per item.
    InteractionLog(std::vector<Interaction> events, std::size_t n_users, std::vector<Vec> item_contexts,
                   RelevantSet relevant = RelevantSet::full, double holdout_fraction = 0.2)
        : events_(std::move(events)), n_users_(n_users), contexts_(std::move(item_contexts)), relevant_(n_users) {
        std::stable_sort(events_.begin(), events_.end(),
                         [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
        std::vector<std::vector<std::size_t>> per_user(n_users);
        for (const Interaction& ev : events_) {
            if (ev.user >= n_users) throw data_error("log: user index out of range");
            if (ev.item >= contexts_.size()) throw data_error("log: item has no context vector");
            per_user[ev.user].push_back(ev.item);
        }
        for (UserId u = 0; u < n_users; ++u) {
            const auto& seq = per_user[u];
            std::size_t first = 0;
            if (relevant == RelevantSet::holdout && !seq.empty()) {
                const auto keep = static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(seq.size())));
                first = seq.size() - std::clamp<std::size_t>(keep, 1, seq.size());
            }
            std::vector<std::size_t> s(seq.begin() + static_cast<std::ptrdiff_t>(first), seq.end());
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
            relevant_[u] = std::move(s);
        }
    }

    const std::vector<Interaction>& events() const noexcept { return events_; }
    std::size_t users() const noexcept { return n_users_; }
    std::size_t items() const noexcept { return contexts_.size(); }
    std::size_t dim() const noexcept { return contexts_.empty() ? 0 : contexts_.front().size(); }
    const std::vector<Vec>& contexts() const noexcept { return contexts_; }

    /// Sorted S_u.
    const std::vector<std::size_t>& interacted(UserId u) const {
        if (u >= n_users_) throw data_error("log: user " + std::to_string(u) + " is not indexed");
        return relevant_[u];
    }

    bool contains(UserId u, std::size_t item) const {
        const auto& s = interacted(u);
        return std::binary_search(s.begin(), s.end(), item);
    }

private:
    std::vector<Interaction> events_;
    std::size_t n_users_ = 0;
    std::vector<Vec> contexts_;
    std::vector<std::vector<std::size_t>> relevant_;
};

/// Logged item plus J-1 distinct other pool items, in shuffled order.
inline CandidateSet build_candidate_set(std::size_t logged_item, std::span<const Vec> pool, std::size_t j, Rng& rng,
                                        std::size_t round = 0) {
    if (j < 1 || j > pool.size()) throw invalid_input("build_candidate_set: pool smaller than J");
    if (logged_item >= pool.size()) throw invalid_input("build_candidate_set: logged item outside the pool");
    std::vector<std::size_t> ids{logged_item};
    for (std::size_t s : sample_without_replacement(pool.size() - 1, j - 1, rng))
        ids.push_back(s >= logged_item ? s + 1 : s);
    fisher_yates(ids, rng);
    CandidateSet c;
    c.round = round;
    for (std::size_t id : ids) c.arms.push_back({id, pool[id]});
    return c;
}

struct MetricsRow {
    std::size_t t = 0;
    double cum_reward = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline double harmonic_f1(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

struct MetricsSeries {
    std::vector<MetricsRow> rows;

    bool empty() const noexcept { return rows.empty(); }
    std::size_t size() const noexcept { return rows.size(); }

    double mean_precision() const { return mean_of(&MetricsRow::precision); }
    double mean_recall() const { return mean_of(&MetricsRow::recall); }
    double cum_reward() const { return rows.empty() ? 0.0 : rows.back().cum_reward; }

    friend bool operator==(const MetricsSeries&, const MetricsSeries&) = default;

private:
    double mean_of(double MetricsRow::*field) const {
        if (rows.empty()) throw invalid_input("metrics: empty series");
        double s = 0.0;
        for (const MetricsRow& r : rows) s += r.*field;
        return s / static_cast<double>(rows.size());
    }
};

/// Mean over rounds of per-round F1 (0/0 rounds count as 0).
inline double f1_summary(const MetricsSeries& series) {
    if (series.empty()) throw invalid_input("f1_summary: empty series");
    double s = 0.0;
    for (const MetricsRow& r : series.rows) s += r.f1;
    return s / static_cast<double>(series.size());
}

/// Replays every event in time order. Candidate sets come from the
/// "candidates" sub-stream of `seed` and policy randomness from "policy", so
/// different policies see identical candidate sets.
inline MetricsSeries replay_evaluate(Policy& policy, const InteractionLog& log, std::size_t j, std::size_t k,
                                     std::uint64_t seed) {
    Rng cand_rng = make_rng(seed, "candidates");
    Rng policy_rng = make_rng(seed, "policy");
    MetricsSeries out;
    out.rows.reserve(log.events().size());
    double cum = 0.0;
    std::size_t t = 0;
    for (const Interaction& ev : log.events()) {
        ++t;
        const auto& s_u = log.interacted(ev.user);
        if (s_u.empty()) throw data_error("replay: user " + std::to_string(ev.user) + " has an empty item set");
        const CandidateSet c = build_candidate_set(ev.item, log.contexts(), j, cand_rng, t);
        const RecommendationList list = policy.recommend(ev.user, c, policy_rng);
        if (list.size() != k) throw invalid_input("replay: policy returned a list of the wrong length");
        std::vector<int> rewards;
        std::size_t hits = 0;
        for (std::size_t idx : list.arm_indices) {
            const int r = log.contains(ev.user, c.arms[idx].item_id) ? 1 : 0;
            rewards.push_back(r);
            hits += static_cast<std::size_t>(r);
        }
        const RoundFeedback fb = mean_feedback(rewards, selected_contexts(c, list));
        policy.update(ev.user, c, list, fb);

        MetricsRow row;
        row.t = t;
        row.precision = static_cast<double>(hits) / static_cast<double>(k);
        row.recall = static_cast<double>(hits) / static_cast<double>(s_u.size());
        row.f1 = harmonic_f1(row.precision, row.recall);
        if (fb.mean_reward != row.precision) throw data_error("replay: reward/precision mismatch");
        cum += fb.mean_reward;
        row.cum_reward = cum;
        out.rows.push_back(row);
    }
    return out;
}

inline constexpr const char* metrics_csv_header = "t,cum_reward,precision,recall,f1";

inline void write_metrics_csv(std::ostream& os, const MetricsSeries& s) {
    os << metrics_csv_header << '\n';
    for (const MetricsRow& r : s.rows)
        os << r.t << ',' << io::format_double(r.cum_reward) << ',' << io::format_double(r.precision) << ','
           << io::format_double(r.recall) << ',' << io::format_double(r.f1) << '\n';
}

inline MetricsSeries read_metrics_csv(std::istream& is) {
    MetricsSeries s;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line) || io::trim_cr(line) != metrics_csv_header)
        throw parse_error("metrics csv: bad header", 1);
    ++lineno;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view l = io::trim_cr(line);
        if (l.empty()) continue;
        const auto f = io::split(l);
        if (f.size() != 5) throw parse_error("metrics csv: expected 5 fields", lineno);
        s.rows.push_back({io::parse_int<std::size_t>(f[0], lineno), io::parse_double(f[1], lineno),
                          io::parse_double(f[2], lineno), io::parse_double(f[3], lineno),
                          io::parse_double(f[4], lineno)});
    }
    return s;
}

// Synthetic replay logs: users with known thetas browse uniformly random
// pool items and click with probability theta.x; clicked items form the log.

struct SyntheticLogConfig {
    std::size_t users = 1000;
    std::size_t pool = 2000;
    std::size_t d = 8;
    std::size_t n_clusters = 10;
    std::size_t min_len = 10;
    std::size_t max_len = 20;
    std::uint64_t seed = 1;
};

inline InteractionLog generate_synthetic_log(const SyntheticLogConfig& cfg, RelevantSet relevant = RelevantSet::full) {
    if (cfg.min_len < 1 || cfg.min_len > cfg.max_len || cfg.max_len > cfg.pool)
        throw invalid_input("synthetic log: need 1 <= min_len <= max_len <= pool");
    EnvConfig ec;
    ec.m = cfg.users;
    ec.n_clusters = cfg.n_clusters;
    ec.d = cfg.d;
    ec.item_pool_size = cfg.pool;
    ec.j = 1;
    ec.k = 1;
    ec.seed = cfg.seed;
    const Environment env = environment_from_config(ec);

    Rng rng = make_rng(cfg.seed, "log");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<std::size_t>> sequences(cfg.users);
    std::vector<UserId> slots;
    for (UserId u = 0; u < cfg.users; ++u) {
        const std::size_t len = cfg.min_len + uniform_index(cfg.max_len - cfg.min_len + 1, rng);
        std::vector<char> seen(cfg.pool, 0);
        while (sequences[u].size() < len) {
            const std::size_t item = uniform_index(cfg.pool, rng);
            if (seen[item] || !(unit(rng) < env.expected_reward(u, env.items[item]))) continue;
            seen[item] = 1;
            sequences[u].push_back(item);
        }
        slots.insert(slots.end(), len, u);
    }
    fisher_yates(slots, rng);
    std::vector<std::size_t> next(cfg.users, 0);
    std::vector<Interaction> events;
    events.reserve(slots.size());
    for (std::size_t pos = 0; pos < slots.size(); ++pos) {
        const UserId u = slots[pos];
        events.push_back({u, sequences[u][next[u]++], 1, static_cast<std::int64_t>(pos)});
    }
    return InteractionLog(std::move(events), cfg.users, env.items, relevant);
}

}  // namespace cocob
