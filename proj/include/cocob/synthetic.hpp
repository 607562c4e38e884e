#pragma once

// Linear-Bernoulli environment with known user preference vectors. Thetas and
// item contexts live on the non-negative orthant of the unit sphere, and items
// are drawn by rejection until every user's expected reward on them lies in
// [0.05, 0.95]. Regret is measured on expected rewards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cocob/domain.hpp"
#include "cocob/error.hpp"
#include "cocob/linalg.hpp"
#include "cocob/rng.hpp"

namespace cocob {

enum class ClusterMode { hard, soft };
enum class RewardNoise { bernoulli, threshold };

struct EnvConfig {
    std::size_t m = 40;
    std::size_t n_clusters = 4;
    std::size_t d = 8;
    std::size_t item_pool_size = 1000;
    std::size_t j = 50;
    std::size_t k = 5;
    std::size_t rounds = 5000;
    ClusterMode cluster_mode = ClusterMode::hard;
    double rho = 0.2;  // angular radius (radians) in soft mode
    RewardNoise noise = RewardNoise::bernoulli;
    std::uint64_t seed = 1;

    void validate() const {
        if (m < 1 || d < 1) throw invalid_input("env: m and d must be positive");
        if (n_clusters < 1 || n_clusters > m) throw invalid_input("env: need 1 <= n_clusters <= m");
        if (j < 1 || j > item_pool_size) throw invalid_input("env: need 1 <= J <= item_pool_size");
        if (k < 1 || k > j) throw invalid_input("env: need 1 <= K <= J");
        if (!(rho >= 0.0 && rho <= 1.5707963267948966)) throw invalid_input("env: rho must lie in [0, pi/2]");
    }
};

inline constexpr double min_expected_reward = 0.05;
inline constexpr double max_expected_reward = 0.95;

struct TrueUser {
    Vec theta;
    std::size_t cluster_id = 0;
};

struct Environment {
    EnvConfig config;
    std::vector<Vec> cluster_centers;
    std::vector<TrueUser> users;
    std::vector<Vec> items;

    double expected_reward(UserId u, std::span<const double> x) const {
        return std::clamp(dot(users.at(u).theta, x), 0.0, 1.0);
    }
};

namespace detail {

/// Uniform direction on the non-negative orthant of the unit sphere.
inline Vec orthant_direction(std::size_t d, Rng& rng) {
    std::normal_distribution<double> n01;
    Vec v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = std::abs(n01(rng));
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

inline void normalize(Vec& v) {
    const double n = std::sqrt(dot(v, v));
    for (double& x : v) x /= n;
}

}  // namespace detail

inline Environment generate_environment(const EnvConfig& config, Rng& rng) {
    config.validate();
    Environment env;
    env.config = config;
    for (std::size_t c = 0; c < config.n_clusters; ++c)
        env.cluster_centers.push_back(detail::orthant_direction(config.d, rng));

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (UserId u = 0; u < config.m; ++u) {
        TrueUser tu{env.cluster_centers[u % config.n_clusters], u % config.n_clusters};
        if (config.cluster_mode == ClusterMode::soft && config.rho > 0.0) {
            // c + s z with |z| = 1, s <= sin(rho): angle to c is at most asin(s).
            const Vec z = detail::orthant_direction(config.d, rng);
            const double s = std::sin(config.rho) * unit(rng);
            for (std::size_t i = 0; i < config.d; ++i) tu.theta[i] += s * z[i];
            detail::normalize(tu.theta);
        }
        env.users.push_back(std::move(tu));
    }

    const std::size_t max_attempts = 10000 * config.item_pool_size + 100000;
    std::size_t attempts = 0;
    while (env.items.size() < config.item_pool_size) {
        if (++attempts > max_attempts)
            throw invalid_input("env: cannot place items with expected rewards inside [0.05, 0.95]");
        Vec x = detail::orthant_direction(config.d, rng);
        const bool ok = std::all_of(env.users.begin(), env.users.end(), [&](const TrueUser& tu) {
            const double r = dot(tu.theta, x);
            return r >= min_expected_reward && r <= max_expected_reward;
        });
        if (ok) env.items.push_back(std::move(x));
    }
    return env;
}

/// Uniform user, J distinct pool items. `round` is stamped on the set.
inline std::pair<UserId, CandidateSet> draw_round(const Environment& env, Rng& rng, std::size_t round) {
    const UserId u = uniform_index(env.config.m, rng);
    CandidateSet c;
    c.round = round;
    for (std::size_t item : sample_without_replacement(env.items.size(), env.config.j, rng))
        c.arms.push_back({item, env.items[item]});
    return {u, std::move(c)};
}

inline RoundFeedback realize_rewards(UserId u, const RecommendationList& list, const CandidateSet& c,
                                     const Environment& env, Rng& rng) {
    std::vector<int> rewards;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t idx : list.arm_indices) {
        const double p = env.expected_reward(u, c.arms.at(idx).context);
        if (env.config.noise == RewardNoise::bernoulli)
            rewards.push_back(unit(rng) < p ? 1 : 0);
        else
            rewards.push_back(p >= 0.5 ? 1 : 0);
    }
    const std::vector<Vec> ctx = selected_contexts(c, list);
    return mean_feedback(rewards, ctx);
}

/// Top-K candidate positions by true expected reward.
inline std::vector<std::size_t> optimal_set(UserId u, const CandidateSet& c, const Environment& env, std::size_t k) {
    std::vector<double> truth(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) truth[j] = env.expected_reward(u, c.arms[j].context);
    return top_k_by_score(truth, k);
}

/// (1/K)(sum of optimal expected rewards - sum of chosen expected rewards).
inline double round_regret(UserId u, const RecommendationList& list, const CandidateSet& c, const Environment& env) {
    const std::size_t k = list.size();
    if (k == 0) throw invalid_input("round_regret: empty recommendation");
    auto sum_sorted = [&](std::vector<std::size_t> idx) {
        std::sort(idx.begin(), idx.end());
        double s = 0.0;
        for (std::size_t i : idx) s += env.expected_reward(u, c.arms.at(i).context);
        return s;
    };
    const double best = sum_sorted(optimal_set(u, c, env, k));
    const double got = sum_sorted(list.arm_indices);
    return std::max(0.0, (best - got) / static_cast<double>(k));
}

/// Plays the ground-truth optimum every round.
class OraclePolicy final : public Policy {
public:
    OraclePolicy(const Environment& env, std::size_t k) : env_(&env), k_(k) {}

    std::string_view name() const override { return "oracle"; }

    RecommendationList recommend(UserId u, const CandidateSet& c, Rng&) const override {
        std::vector<double> truth(c.size());
        for (std::size_t j = 0; j < c.size(); ++j) truth[j] = env_->expected_reward(u, c.arms[j].context);
        return list_from_scores(truth, k_);
    }

    void update(UserId, const CandidateSet&, const RecommendationList&, const RoundFeedback&) override {}

private:
    const Environment* env_;
    std::size_t k_;
};

// Manifest: `key=value` lines, enough to regenerate the environment exactly.

inline std::string to_string(ClusterMode m) { return m == ClusterMode::hard ? "hard" : "soft"; }
inline std::string to_string(RewardNoise n) { return n == RewardNoise::bernoulli ? "bernoulli" : "threshold"; }

inline void write_env_manifest(std::ostream& os, const EnvConfig& c) {
    std::ostringstream rho;
    rho.precision(17);
    rho << c.rho;
    os << "format=cocob-env 1\n"
       << "m=" << c.m << "\n"
       << "n_clusters=" << c.n_clusters << "\n"
       << "d=" << c.d << "\n"
       << "item_pool_size=" << c.item_pool_size << "\n"
       << "J=" << c.j << "\n"
       << "K=" << c.k << "\n"
       << "T=" << c.rounds << "\n"
       << "cluster_mode=" << to_string(c.cluster_mode) << "\n"
       << "rho=" << rho.str() << "\n"
       << "noise=" << to_string(c.noise) << "\n"
       << "seed=" << c.seed << "\n";
}

inline EnvConfig read_env_manifest(std::istream& is) {
    EnvConfig c;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error("env manifest: expected key=value", lineno);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        try {
            if (key == "format") {
                if (val != "cocob-env 1") throw parse_error("env manifest: unsupported format '" + val + "'", lineno);
                header = true;
            } else if (key == "m") c.m = std::stoull(val);
            else if (key == "n_clusters") c.n_clusters = std::stoull(val);
            else if (key == "d") c.d = std::stoull(val);
            else if (key == "item_pool_size") c.item_pool_size = std::stoull(val);
            else if (key == "J") c.j = std::stoull(val);
            else if (key == "K") c.k = std::stoull(val);
            else if (key == "T") c.rounds = std::stoull(val);
            else if (key == "cluster_mode") {
                if (val != "hard" && val != "soft") throw schema_error("env manifest: bad cluster_mode", lineno);
                c.cluster_mode = val == "hard" ? ClusterMode::hard : ClusterMode::soft;
            } else if (key == "rho") c.rho = std::stod(val);
            else if (key == "noise") {
                if (val != "bernoulli" && val != "threshold") throw schema_error("env manifest: bad noise", lineno);
                c.noise = val == "bernoulli" ? RewardNoise::bernoulli : RewardNoise::threshold;
            } else if (key == "seed") c.seed = std::stoull(val);
            else throw schema_error("env manifest: unknown key '" + key + "'", lineno);
        } catch (const std::logic_error&) {
            throw parse_error("env manifest: bad value for '" + key + "'", lineno);
        }
    }
    if (!header) throw parse_error("env manifest: missing format line");
    c.validate();
    return c;
}

/// Regenerates the environment from its config using the "environment" sub-stream.
inline Environment environment_from_config(const EnvConfig& c) {
    Rng rng = make_rng(c.seed, "environment");
    return generate_environment(c, rng);
}

}  // namespace cocob
