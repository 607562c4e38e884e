#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cocob/baselines.hpp"
#include "cocob/synthetic.hpp"
#include "oracles.hpp"

using namespace cocob;

namespace {

EnvConfig small_config() {
    EnvConfig c;
    c.m = 10;
    c.n_clusters = 2;
    c.d = 4;
    c.item_pool_size = 100;
    c.j = 20;
    c.k = 3;
    return c;
}

/// Hand-built environment: one user, items given explicitly.
Environment manual_env(Vec theta, std::vector<Vec> items, std::size_t k) {
    Environment env;
    env.config.m = 1;
    env.config.n_clusters = 1;
    env.config.d = theta.size();
    env.config.item_pool_size = items.size();
    env.config.j = items.size();
    env.config.k = k;
    env.users.push_back({std::move(theta), 0});
    env.items = std::move(items);
    return env;
}

CandidateSet whole_pool(const Environment& env) {
    CandidateSet c;
    c.round = 1;
    for (std::size_t i = 0; i < env.items.size(); ++i) c.arms.push_back({i, env.items[i]});
    return c;
}

}  // namespace

TEST(GenerateEnvironment, SingleClusterSharesTheta) {
    EnvConfig c = small_config();
    c.n_clusters = 1;
    const Environment env = environment_from_config(c);
    for (const TrueUser& u : env.users) EXPECT_EQ(u.theta, env.users[0].theta);
}

TEST(GenerateEnvironment, RoundRobinTwoClusters) {
    EnvConfig c = small_config();
    c.d = 2;
    c.m = 4;
    c.n_clusters = 2;
    const Environment env = environment_from_config(c);
    std::set<Vec> thetas;
    for (const TrueUser& u : env.users) thetas.insert(u.theta);
    ASSERT_EQ(thetas.size(), 2u);
    EXPECT_EQ(env.users[0].theta, env.users[2].theta);
    EXPECT_EQ(env.users[1].theta, env.users[3].theta);
    EXPECT_EQ(env.users[1].cluster_id, 1u);
}

TEST(GenerateEnvironment, UnitNormThetas) {
    EnvConfig c = small_config();
    c.cluster_mode = ClusterMode::soft;
    c.rho = 0.3;
    const Environment env = environment_from_config(c);
    for (const TrueUser& u : env.users) {
        EXPECT_NEAR(std::sqrt(dot(u.theta, u.theta)), 1.0, 1e-12);
        const Vec& center = env.cluster_centers[u.cluster_id];
        EXPECT_LE(std::acos(std::min(1.0, dot(u.theta, center))), 0.3 + 1e-9);
    }
}

TEST(GenerateEnvironment, ExpectedRewardsInsideBand) {
    EnvConfig c = small_config();
    c.m = 40;
    c.n_clusters = 4;
    c.d = 8;
    c.item_pool_size = 250;  // 40 users x 250 items = 10^4 pairs
    const Environment env = environment_from_config(c);
    std::size_t scanned = 0;
    for (UserId u = 0; u < c.m; ++u)
        for (const Vec& x : env.items) {
            const double r = dot(env.users[u].theta, x);
            EXPECT_GE(r, 0.05);
            EXPECT_LE(r, 0.95);
            ++scanned;
        }
    EXPECT_EQ(scanned, 10000u);
}

TEST(GenerateEnvironment, InvalidConfigsRejected) {
    EnvConfig c = small_config();
    c.n_clusters = c.m + 1;
    EXPECT_THROW(environment_from_config(c), invalid_input);
    c = small_config();
    c.j = c.item_pool_size + 1;
    EXPECT_THROW(environment_from_config(c), invalid_input);
}

TEST(DrawRound, PoolEqualsJGivesWholePool) {
    EnvConfig c = small_config();
    c.item_pool_size = c.j;
    const Environment env = environment_from_config(c);
    Rng rng(3);
    const auto [u, cs] = draw_round(env, rng, 1);
    std::vector<std::size_t> ids;
    for (const Arm& a : cs.arms) ids.push_back(a.item_id);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], i);
}

TEST(DrawRound, UniformUsers) {
    EnvConfig c = small_config();
    c.m = 4;  // relative +-2% is about 3.6 binomial sd per user
    const Environment env = environment_from_config(c);
    Rng rng(5);
    std::vector<double> freq(4, 0.0);
    const int n = 100000;
    for (int t = 1; t <= n; ++t) freq[draw_round(env, rng, t).first] += 1.0 / n;
    for (double f : freq) EXPECT_NEAR(f, 0.25, 0.25 * 0.02);
}

TEST(DrawRound, DeterministicUnderSeed) {
    const Environment a = environment_from_config(small_config());
    const Environment b = environment_from_config(small_config());
    EXPECT_EQ(a.items, b.items);
    Rng ra(11), rb(11);
    for (int t = 1; t <= 50; ++t) {
        const auto x = draw_round(a, ra, t), y = draw_round(b, rb, t);
        EXPECT_EQ(x.first, y.first);
        for (std::size_t i = 0; i < x.second.size(); ++i) EXPECT_EQ(x.second.arms[i].item_id, y.second.arms[i].item_id);
    }
}

TEST(RealizeRewards, DegenerateProbabilities) {
    const Environment env = manual_env({1.0, 0.0}, {{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}}, 2);
    const CandidateSet cs = whole_pool(env);
    Rng rng(2);
    RecommendationList ones, zeros;
    ones.arm_indices = {0, 1};
    zeros.arm_indices = {2, 3};
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(realize_rewards(0, ones, cs, env, rng).mean_reward, 1.0);
        EXPECT_EQ(realize_rewards(0, zeros, cs, env, rng).mean_reward, 0.0);
    }
}

TEST(RealizeRewards, BinomialConcentration) {
    const Environment env = manual_env({1.0, 0.0}, std::vector<Vec>(10, Vec{0.5, 0.5}), 10);
    const CandidateSet cs = whole_pool(env);
    RecommendationList all;
    for (std::size_t i = 0; i < 10; ++i) all.arm_indices.push_back(i);
    Rng rng(8);
    double sum = 0.0;
    const int rounds = 10000;
    for (int i = 0; i < rounds; ++i) sum += realize_rewards(0, all, cs, env, rng).mean_reward;
    EXPECT_NEAR(sum / rounds, 0.5, 0.015);
}

TEST(RealizeRewards, LagOneAutocorrelation) {
    const Environment env = manual_env({1.0, 0.0}, {{0.3, 0.7}}, 1);
    const CandidateSet cs = whole_pool(env);
    RecommendationList one;
    one.arm_indices = {0};
    Rng rng(21);
    const int n = 100000;
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) r[i] = realize_rewards(0, one, cs, env, rng).mean_reward;
    double mean = 0.0;
    for (double x : r) mean += x / n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        den += (r[i] - mean) * (r[i] - mean);
        if (i + 1 < n) num += (r[i] - mean) * (r[i + 1] - mean);
    }
    EXPECT_LT(std::abs(num / den), 0.02);
}

TEST(RoundRegret, OptimalPlayIsZero) {
    const Environment env = environment_from_config(small_config());
    Rng rng(4);
    OraclePolicy oracle_policy(env, 3);
    for (int t = 1; t <= 100; ++t) {
        const auto [u, cs] = draw_round(env, rng, t);
        EXPECT_EQ(round_regret(u, oracle_policy.recommend(u, cs, rng), cs, env), 0.0);
    }
}

TEST(RoundRegret, NoChoiceWhenKEqualsJ) {
    const Environment env = environment_from_config(small_config());
    Rng rng(6);
    for (int t = 1; t <= 50; ++t) {
        const auto [u, cs] = draw_round(env, rng, t);
        RecommendationList l = random_recommend(cs, cs.size(), rng);
        EXPECT_EQ(round_regret(u, l, cs, env), 0.0);
    }
}

TEST(RoundRegret, MatchesBruteForceSubsetOptimum) {
    EnvConfig c = small_config();
    c.j = 6;
    c.k = 2;
    const Environment env = environment_from_config(c);
    Rng rng(12);
    for (int t = 1; t <= 200; ++t) {
        const auto [u, cs] = draw_round(env, rng, t);
        const RecommendationList l = random_recommend(cs, 2, rng);
        std::vector<double> truth;
        for (const Arm& a : cs.arms) truth.push_back(dot(env.users[u].theta, a.context));
        const double chosen = truth[l.arm_indices[0]] + truth[l.arm_indices[1]];
        const double expect = (oracle::best_subset_sum(truth, 2) - chosen) / 2.0;
        EXPECT_NEAR(round_regret(u, l, cs, env), expect, 1e-12);
        EXPECT_GE(round_regret(u, l, cs, env), 0.0);
    }
}

TEST(RoundRegret, TopKIsSubsetOptimumForSmallJ) {
    Rng rng(30);
    for (std::size_t j = 1; j <= 8; ++j)
        for (std::size_t k = 1; k <= j; ++k) {
            EnvConfig c = small_config();
            c.item_pool_size = 40;
            c.j = j;
            c.k = k;
            c.seed = 100 * j + k;
            const Environment env = environment_from_config(c);
            const auto [u, cs] = draw_round(env, rng, 1);
            std::vector<double> truth;
            for (const Arm& a : cs.arms) truth.push_back(env.expected_reward(u, a.context));
            double top = 0.0;
            for (std::size_t i : optimal_set(u, cs, env, k)) top += truth[i];
            EXPECT_NEAR(top, oracle::best_subset_sum(truth, k), 1e-12) << "J=" << j << " K=" << k;
        }
}

TEST(RoundRegret, NeverNegativeForAnyPolicy) {
    const Environment env = environment_from_config(small_config());
    LinUcb lin(10, 4, {0.1, 3});
    Rng rounds(1), rewards(2), pol(3);
    for (std::size_t t = 1; t <= 300; ++t) {
        const auto [u, cs] = draw_round(env, rounds, t);
        const auto l = lin.recommend(u, cs, pol);
        EXPECT_GE(round_regret(u, l, cs, env), 0.0);
        lin.update(u, cs, l, realize_rewards(u, l, cs, env, rewards));
    }
}

TEST(EnvManifest, RoundTripRegeneratesBitExactly) {
    EnvConfig c = small_config();
    c.cluster_mode = ClusterMode::soft;
    c.rho = 0.1234567890123;
    c.noise = RewardNoise::threshold;
    c.seed = 987654321;
    std::stringstream ss;
    write_env_manifest(ss, c);
    const EnvConfig back = read_env_manifest(ss);
    EXPECT_EQ(back.rho, c.rho);
    const Environment a = environment_from_config(c), b = environment_from_config(back);
    EXPECT_EQ(a.items, b.items);
    for (std::size_t u = 0; u < c.m; ++u) EXPECT_EQ(a.users[u].theta, b.users[u].theta);
}

TEST(EnvManifest, RejectsMalformed) {
    std::stringstream missing("m=3\n");
    EXPECT_THROW(read_env_manifest(missing), parse_error);
    std::stringstream unknown("format=cocob-env 1\nbogus=1\n");
    EXPECT_THROW(read_env_manifest(unknown), schema_error);
    std::stringstream bad("format=cocob-env 1\nm=abc\n");
    try {
        read_env_manifest(bad);
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}
