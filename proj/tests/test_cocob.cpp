#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cocob/cocob.hpp"
#include "oracles.hpp"

using namespace cocob;

namespace {

CandidateSet axis_candidates(std::size_t d, std::size_t round) {
    CandidateSet c;
    c.round = round;
    for (std::size_t i = 0; i < d; ++i) {
        Vec x(d, 0.0);
        x[i] = 1.0;
        c.arms.push_back({i, x});
    }
    return c;
}

CandidateSet random_candidates(std::size_t j, std::size_t d, std::size_t round, std::mt19937_64& rng) {
    CandidateSet c;
    c.round = round;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < j; ++i) {
        Vec x(d);
        for (double& v : x) v = u(rng);
        c.arms.push_back({i, x});
    }
    return c;
}

RoundFeedback feedback(double r, Vec x) {
    RoundFeedback fb;
    fb.mean_reward = r;
    fb.mean_context = std::move(x);
    return fb;
}

double sample_mean(BetaParams p, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += sample_similarity(p, rng);
    return s / static_cast<double>(n);
}

}  // namespace

TEST(SampleSimilarity, SymmetricPriorMean) {
    const double m = sample_mean({15, 15}, 100000, 1);
    EXPECT_GE(m, 0.495);
    EXPECT_LE(m, 0.505);
}

TEST(SampleSimilarity, SkewedPosteriorMean) {
    // Beta(115, 15) has mean 115/130 = 0.88462.
    const double m = sample_mean({115, 15}, 100000, 2);
    EXPECT_GE(m, 0.879);
    EXPECT_LE(m, 0.890);
}

TEST(SampleSimilarity, UniformPassesKolmogorovSmirnov) {
    Rng rng(3);
    std::vector<double> xs(100000);
    for (double& x : xs) {
        x = sample_similarity({1, 1}, rng);
        ASSERT_GT(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
    // Critical value at level 0.01: 1.628 / sqrt(n).
    EXPECT_LT(oracle::ks_uniform(xs), 1.628 / std::sqrt(100000.0));
}

TEST(SampleSimilarity, NonPositiveParametersRejected) {
    Rng rng(1);
    EXPECT_THROW(sample_similarity({0.0, 1.0}, rng), invalid_input);
    EXPECT_THROW(sample_similarity({1.0, -2.0}, rng), invalid_input);
}

TEST(SimilarityTable, UnorderedPairsShareOneEntry) {
    SimilarityTable t(4, {15, 15});
    t(1, 3).alpha += 2;
    EXPECT_EQ(t(3, 1).alpha, 17.0);
    t(2, 2).beta += 1;
    EXPECT_EQ(t(2, 2).beta, 16.0);
    EXPECT_EQ(t.entries().size(), 10u);
    EXPECT_THROW(t(4, 0), invalid_input);
}

TEST(FindNeighbors, GammaZeroAdmitsEveryone) {
    SimilarityTable t(6, {15, 15});
    Rng rng(5);
    const NeighborSet n = find_neighbors(2, t, 0.0, rng);
    EXPECT_EQ(n.members, (std::vector<UserId>{0, 1, 2, 3, 4, 5}));
}

TEST(FindNeighbors, GammaOneFallsBackToSelf) {
    SimilarityTable t(6, {500, 1});
    Rng rng(5);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(find_neighbors(4, t, 1.0, rng).members, (std::vector<UserId>{4}));
}

TEST(FindNeighbors, ReplayedDrawsOracle) {
    SimilarityTable t(3, {15, 15});
    t(0, 2) = {40, 5};  // make one qualifying neighbor likely
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double gamma : {0.8, 0.5}) {
            Rng rng(seed);
            Rng replay(seed);
            const NeighborSet got = find_neighbors(0, t, gamma, rng);
            std::vector<UserId> expect;
            for (UserId v = 0; v < 3; ++v) {
                const BetaParams p = t(0, v);
                const double x = std::gamma_distribution<double>(p.alpha, 1.0)(replay);
                const double y = std::gamma_distribution<double>(p.beta, 1.0)(replay);
                if (x / (x + y) >= gamma) expect.push_back(v);
            }
            if (expect.empty()) expect.push_back(0);
            EXPECT_EQ(got.members, expect) << "seed " << seed << " gamma " << gamma;
        }
    }
}

TEST(FindNeighbors, PropertyNonEmptyAndGammaMonotone) {
    SimilarityTable t(12, {15, 15});
    std::mt19937_64 gen(8);
    for (BetaParams& p : t.entries()) p = {1.0 + static_cast<double>(gen() % 30), 1.0 + static_cast<double>(gen() % 30)};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const double g1 = static_cast<double>(seed % 10) / 10.0;
        const double g2 = std::min(1.0, g1 + 0.15);
        Rng a(seed), b(seed);
        const auto loose = find_neighbors(seed % 12, t, g1, a).members;
        const auto strict = find_neighbors(seed % 12, t, g2, b).members;
        ASSERT_FALSE(loose.empty());
        ASSERT_FALSE(strict.empty());
        const bool strict_is_fallback = strict.size() == 1 && strict.front() == seed % 12 &&
                                        std::find(loose.begin(), loose.end(), seed % 12) == loose.end();
        if (!strict_is_fallback) {
            EXPECT_TRUE(std::includes(loose.begin(), loose.end(), strict.begin(), strict.end()));
        }
    }
}

TEST(AggregateNeighborhood, SingletonIsExact) {
    std::vector<UserModel> models(3, UserModel(3));
    models[1].observe(Vec{0.2, 0.7, 0.1}, 1.0);
    models[1].observe(Vec{0.5, 0.1, 0.3}, 0.4);
    const std::vector<UserId> n{1};
    const Aggregate a = aggregate_neighborhood(n, models);
    EXPECT_EQ(a.gram, models[1].gram);
    EXPECT_EQ(a.b, models[1].b);
    EXPECT_EQ(a.w, models[1].w);
}

TEST(AggregateNeighborhood, TwoUserArithmetic) {
    std::vector<UserModel> models(2, UserModel(2));
    const Vec d1{2.0, 1.0}, d2{1.0, 2.0};
    models[0].gram = Mat::diagonal(d1);
    models[1].gram = Mat::diagonal(d2);
    models[0].b = models[1].b = Vec{1.0, 1.0};
    const std::vector<UserId> n{0, 1};
    const Aggregate a = aggregate_neighborhood(n, models);
    EXPECT_DOUBLE_EQ(a.gram(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(a.gram(1, 1), 1.5);
    EXPECT_DOUBLE_EQ(a.gram(0, 1), 0.0);
    EXPECT_EQ(a.b, (Vec{1.0, 1.0}));
    EXPECT_NEAR(a.w[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(a.w[1], 2.0 / 3.0, 1e-15);
}

TEST(AggregateNeighborhood, FiveUsersMatchDenseOracle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t d = 6;
    std::vector<UserModel> models(5, UserModel(d));
    for (UserModel& m : models)
        for (int s = 0; s < 30; ++s) {
            Vec x(d);
            for (double& v : x) v = u(rng);
            m.observe(x, u(rng) < 0.5 ? 0.0 : 0.6);
        }
    const std::vector<UserId> n{0, 1, 2, 3, 4};
    const Aggregate a = aggregate_neighborhood(n, models);
    Mat sum_m(d);
    Vec sum_b(d, 0.0);
    for (const UserModel& m : models) {
        for (std::size_t i = 0; i < d; ++i) {
            sum_b[i] += m.b[i] / 5.0;
            for (std::size_t j = 0; j < d; ++j) sum_m(i, j) += m.gram(i, j) / 5.0;
        }
    }
    const Vec w = oracle::solve(sum_m, sum_b);
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(a.w[i], w[i], 1e-8);
}

TEST(AggregateNeighborhood, EmptyIsContractViolation) {
    std::vector<UserModel> models(2, UserModel(2));
    EXPECT_THROW(aggregate_neighborhood(std::vector<UserId>{}, models), invalid_input);
}

TEST(ScoreArm, ZeroRoundKillsExploration) {
    const Vec w{0.0, 0.0}, x{0.3, 0.9};
    EXPECT_EQ(score_arm(w, Mat::identity(2), x, 0.1, 0), 0.0);
}

TEST(ScoreArm, PureExploitation) {
    const Vec w{1.0, 0.0}, x{1.0, 0.0};
    EXPECT_EQ(score_arm(w, Mat::identity(2), x, 0.0, 7), 1.0);
}

TEST(ScoreArm, HandEvaluatedUcb) {
    const Vec diag{2.0, 1.0}, b{1.0, 0.0}, x{1.0, 0.0};
    const Mat m = Mat::diagonal(diag);
    const Vec w = solve_spd(m, b);
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    // independent scalar evaluation: x^T M^-1 x = 1/2
    const double expect = 0.5 + 0.1 * std::sqrt(0.5 * std::log(2.0));
    EXPECT_NEAR(score_arm(w, m, x, 0.1, 1), expect, 1e-12);
    EXPECT_NEAR(expect, 0.55887, 1e-5);
}

TEST(ScoreArm, PropertyDecomposition) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat m = oracle::random_spd(4, rng);
        const Vec w = oracle::random_vec(4, rng), x = oracle::random_vec(4, rng);
        const std::size_t t = trial;
        EXPECT_EQ(score_arm(w, m, x, 0.0, t), dot(w, x));
        EXPECT_GE(score_arm(w, m, x, 0.3, t) - dot(w, x), 0.0);
    }
}

TEST(ScoreArm, NegativeRadicandRejected) {
    EXPECT_THROW(exploration_bonus(-1e-6, 0.1, 5), numerical_degeneracy);
    EXPECT_EQ(exploration_bonus(-1e-13, 0.1, 5), 0.0);
}

TEST(CocobRecommend, ColdStartUsesTieRule) {
    Cocob c(5, 3, {0.8, 15, 15, 0.0, 2});
    std::mt19937_64 gen(1);
    const CandidateSet cs = random_candidates(7, 3, 1, gen);
    Rng rng(1);
    const auto list = c.recommend(2, cs, rng);
    EXPECT_EQ(list.arm_indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(list.scores, (std::vector<double>{0.0, 0.0}));
}

TEST(CocobRecommend, SingleUserPrefersRewardedDirection) {
    Cocob c(1, 2, {0.8, 15, 15, 0.1, 1});
    c.update(0, std::vector<UserId>{0}, feedback(1.0, {1.0, 0.0}));
    Rng rng(3);
    const CandidateSet cs = axis_candidates(2, 2);
    const auto list = c.recommend(0, cs, rng);
    // direct evaluation: M = diag(2, 1), w = (0.5, 0)
    const double s0 = 0.5 + 0.1 * std::sqrt(0.5 * std::log(3.0));
    const double s1 = 0.0 + 0.1 * std::sqrt(1.0 * std::log(3.0));
    ASSERT_GT(s0, s1);
    EXPECT_EQ(list.arm_indices, (std::vector<std::size_t>{0}));
    EXPECT_NEAR(list.scores[0], s0, 1e-12);
}

TEST(CocobRecommend, AggregationChangesScoresUnlessModelsEqual) {
    Cocob c(2, 2, {0.8, 15, 15, 0.1, 2});
    std::mt19937_64 gen(2);
    const CandidateSet cs = random_candidates(6, 2, 3, gen);
    const NeighborSet both{{0, 1}, 3}, self{{0}, 3};
    EXPECT_EQ(c.recommend_with(0, cs, both).scores, c.recommend_with(0, cs, self).scores);
    c.update(1, std::vector<UserId>{1}, feedback(1.0, {0.9, 0.1}));
    EXPECT_NE(c.recommend_with(0, cs, both).scores, c.recommend_with(0, cs, self).scores);
}

TEST(CocobRecommend, DeterministicUnderSeed) {
    Cocob c(8, 3, {0.5, 15, 15, 0.1, 3});
    std::mt19937_64 gen(5);
    for (int i = 0; i < 20; ++i) {
        const UserId u = gen() % 8;
        const CandidateSet cs = random_candidates(10, 3, i + 1, gen);
        Rng rng(i);
        const auto list = c.recommend(u, cs, rng);
        c.update(u, cs, list, feedback(i % 3 ? 0.5 : 0.0, cs.arms[list.arm_indices[0]].context));
    }
    const CandidateSet cs = random_candidates(10, 3, 50, gen);
    Rng a(99), b(99);
    const auto la = c.recommend(3, cs, a), lb = c.recommend(3, cs, b);
    EXPECT_EQ(la.arm_indices, lb.arm_indices);
    EXPECT_EQ(la.scores, lb.scores);
    EXPECT_EQ(la.neighbors, lb.neighbors);
}

TEST(CocobUpdate, PositiveRewardIncrementsAlpha) {
    Cocob c(3, 2, {});
    c.update(0, std::vector<UserId>{0, 1}, feedback(0.3, {0.5, 0.5}));
    EXPECT_EQ(c.similarity()(0, 1), (BetaParams{16, 15}));
    EXPECT_EQ(c.similarity()(0, 0), (BetaParams{16, 15}));
    EXPECT_EQ(c.similarity()(0, 2), (BetaParams{15, 15}));
    EXPECT_EQ(c.similarity()(1, 1), (BetaParams{15, 15}));
}

TEST(CocobUpdate, ZeroRewardIncrementsBeta) {
    Cocob c(3, 2, {});
    c.update(2, std::vector<UserId>{1, 2}, feedback(0.0, {0.5, 0.5}));
    EXPECT_EQ(c.similarity()(2, 1), (BetaParams{15, 16}));
    EXPECT_EQ(c.similarity()(2, 2), (BetaParams{15, 16}));
}

TEST(CocobUpdate, RidgeStepOnFreshModel) {
    Cocob c(2, 2, {});
    c.update(0, std::vector<UserId>{0}, feedback(1.0, {1.0, 0.0}));
    const UserModel& m = c.models()[0];
    EXPECT_EQ(m.gram, Mat::diagonal(Vec{2.0, 1.0}));
    EXPECT_EQ(m.b, (Vec{1.0, 0.0}));
    EXPECT_NEAR(m.w[0], 0.5, 1e-15);
    EXPECT_EQ(m.w[1], 0.0);
    EXPECT_EQ(c.models()[1], UserModel(2));
}

TEST(CocobUpdate, PropertyMonotoneCountersAndReadOnlyNeighbors) {
    Cocob c(6, 3, {0.3, 15, 15, 0.1, 2});
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 1; round <= 300; ++round) {
        const UserId user = gen() % 6;
        const CandidateSet cs = random_candidates(8, 3, round, gen);
        Rng rng(round);
        const auto list = c.recommend(user, cs, rng);
        const SimilarityTable before = c.similarity();
        const auto models_before = c.models();
        const double r = u(gen) < 0.4 ? 0.0 : 0.5;
        c.update(user, cs, list, feedback(r, cs.arms[list.arm_indices[0]].context));
        for (UserId v = 0; v < 6; ++v) {
            if (v != user) {
                EXPECT_EQ(c.models()[v], models_before[v]);
            }
            for (UserId w = v; w < 6; ++w) {
                const BetaParams a = before(v, w), b = c.similarity()(v, w);
                EXPECT_GE(b.alpha, a.alpha);
                EXPECT_GE(b.beta, a.beta);
                const bool in_round = (v == user && std::count(list.neighbors.begin(), list.neighbors.end(), w)) ||
                                      (w == user && std::count(list.neighbors.begin(), list.neighbors.end(), v));
                const double inc = (b.alpha - a.alpha) + (b.beta - a.beta);
                EXPECT_EQ(inc, in_round ? 1.0 : 0.0);
            }
        }
    }
}

TEST(CocobUpdate, MaintainedInverseStaysConsistentOverLongRuns) {
    const std::size_t d = 16;
    Cocob c(1, d, {});
    std::mt19937_64 gen(10);
    std::normal_distribution<double> n;
    for (int t = 0; t < 10000; ++t) {
        Vec x(d);
        double norm = 0.0;
        for (double& v : x) {
            v = std::abs(n(gen));
            norm += v * v;
        }
        for (double& v : x) v /= std::sqrt(norm);
        c.update(0, std::vector<UserId>{0}, feedback(t % 3 ? 0.4 : 0.0, x));
    }
    const UserModel& m = c.models()[0];
    EXPECT_LT(oracle::identity_error(oracle::product(m.gram, m.gram_inv)), 1e-6);
    EXPECT_LT(asymmetry(m.gram_inv), 1e-9);
}

TEST(CocobSnapshot, RoundTripIsBitExact) {
    Cocob c(4, 3, {0.6, 12, 18, 0.2, 2});
    std::mt19937_64 gen(12);
    for (int round = 1; round <= 60; ++round) {
        const UserId u = gen() % 4;
        const CandidateSet cs = random_candidates(6, 3, round, gen);
        Rng rng(round);
        const auto list = c.recommend(u, cs, rng);
        c.update(u, cs, list, feedback(round % 4 ? 0.5 : 0.0, cs.arms[list.arm_indices[1]].context));
    }
    std::stringstream ss;
    c.save(ss);
    const Cocob back = Cocob::load(ss);
    EXPECT_TRUE(back == c);

    std::stringstream again;
    back.save(again);
    std::stringstream first;
    c.save(first);
    EXPECT_EQ(again.str(), first.str());
}

TEST(CocobSnapshot, RejectsBadInput) {
    std::stringstream bad("cocob-snapshot 2\n");
    EXPECT_THROW(Cocob::load(bad), parse_error);
    std::stringstream truncated("cocob-snapshot 1\n2 2 1\n");
    EXPECT_THROW(Cocob::load(truncated), parse_error);
}

TEST(CocobConfig, Validation) {
    EXPECT_THROW(Cocob(2, 2, {1.5, 15, 15, 0.1, 1}), invalid_input);
    EXPECT_THROW(Cocob(2, 2, {0.5, 0, 15, 0.1, 1}), invalid_input);
    EXPECT_THROW(Cocob(2, 2, {0.5, 15, 15, 0.1, 0}), invalid_input);
}
