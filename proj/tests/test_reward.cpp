#include "wmtok/reward.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wmtok;

namespace {

NormalizedScores ns(RubricArray v) { return NormalizedScores{v}; }

} // namespace

TEST(Scores, Normalize) {
    EXPECT_EQ(normalize_scores(ScoreVector{{3, 2, 1, 1, 1, 2}}).values, (RubricArray{1, 1, 1, 1, 1, 1}));
    EXPECT_EQ(normalize_scores(ScoreVector{{0, 0, 0, 0, 0, 0}}).values, (RubricArray{0, 0, 0, 0, 0, 0}));
    EXPECT_EQ(normalize_scores(ScoreVector{{1.5, 1, 0.5, 0.5, 0.5, 1}}).values,
              (RubricArray{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}));
    EXPECT_THROW(normalize_scores(ScoreVector{{3.5, 0, 0, 0, 0, 0}}), InvalidArgument);
    EXPECT_THROW(normalize_scores(ScoreVector{{0, 0, 0, 0, 0, -0.1}}), InvalidArgument);
}

TEST(Scores, Composite) {
    const RewardConfig cfg;
    EXPECT_NEAR(composite_reward(ns({1, 1, 1, 1, 1, 1}), cfg.weights), 1.0, 1e-15);
    EXPECT_EQ(composite_reward(ns({0, 0, 0, 0, 0, 0}), cfg.weights), 0.0);
    EXPECT_EQ(composite_reward(ns({1, 0, 1, 0, 1, 0}), RubricArray{1, 1, 1, 1, 1, 1}), 3.0);
}

TEST(ScoresProperty, CompositeMonotone) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        RubricArray s, w;
        for (std::size_t k = 0; k < 6; ++k) {
            s[k] = u(rng);
            w[k] = u(rng);
        }
        const double base = composite_reward(ns(s), w);
        const std::size_t k = i % 6;
        RubricArray t = s;
        t[k] = std::min(1.0, t[k] + u(rng));
        EXPECT_GE(composite_reward(ns(t), w), base);
    }
}

TEST(Distill, ExactCases) {
    const RubricArray one{1, 0, 0, 0, 0, 0};
    const auto t = ns({0.3, 0.5, 0.2, 0.9, 0.0, 1.0});
    EXPECT_EQ(distill_loss(t, t, RubricArray{1, 1, 1, 1, 1, 1}, 0.5), 0.0);
    EXPECT_NEAR(distill_loss(ns({0.2, 0, 0, 0, 0, 0}), ns({0, 0, 0, 0, 0, 0}), one, 0.5), 0.02, 1e-15);
    EXPECT_NEAR(distill_loss(ns({1.0, 0, 0, 0, 0, 0}), ns({0, 0, 0, 0, 0, 0}), one, 0.5), 0.375, 1e-15);
    EXPECT_THROW(distill_loss(t, t, one, 0.0), InvalidArgument);
}

TEST(DistillProperty, SymmetricAndZeroIffEqual) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    const RubricArray lam{1, 2, 0.5, 1, 3, 1};
    for (int i = 0; i < 1000; ++i) {
        RubricArray a, b;
        for (std::size_t k = 0; k < 6; ++k) {
            a[k] = u(rng);
            b[k] = u(rng);
        }
        EXPECT_DOUBLE_EQ(distill_loss(ns(a), ns(b), lam, 0.5), distill_loss(ns(b), ns(a), lam, 0.5));
        EXPECT_GT(distill_loss(ns(a), ns(b), lam, 0.5), 0.0);
        EXPECT_EQ(distill_loss(ns(a), ns(a), lam, 0.5), 0.0);
    }
}

TEST(Advantages, Examples) {
    const auto a = group_advantages(std::vector<double>{1, 2, 3});
    const double s = 1.0 / std::sqrt(2.0 / 3.0);
    EXPECT_NEAR(a[0], -s, 1e-12);
    EXPECT_NEAR(a[0], -1.224744871, 1e-9);
    EXPECT_EQ(a[1], 0.0);
    EXPECT_NEAR(a[2], 1.224744871, 1e-9);
    EXPECT_EQ(group_advantages(std::vector<double>{2, 2, 2}), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(group_advantages(std::vector<double>{0, 1}), (std::vector<double>{-1, 1}));
    EXPECT_THROW(group_advantages(std::vector<double>{1}), InvalidArgument);
    EXPECT_THROW(group_advantages(std::vector<double>{1, NAN}), InvalidArgument);
}

TEST(AdvantagesProperty, ShiftAndScaleInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> r(8);
        for (auto& x : r)
            x = u(rng);
        const auto a = group_advantages(r);
        double mean = 0.0, var = 0.0;
        for (double x : a)
            mean += x;
        mean /= 8;
        for (double x : a)
            var += (x - mean) * (x - mean);
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(var / 8, 1.0, 1e-12);
        const double c = u(rng), scale = std::abs(u(rng)) + 0.1;
        std::vector<double> shifted = r, scaled = r;
        for (auto& x : shifted)
            x += c;
        for (auto& x : scaled)
            x *= scale;
        const auto as = group_advantages(shifted), ak = group_advantages(scaled);
        for (std::size_t j = 0; j < 8; ++j) {
            EXPECT_NEAR(as[j], a[j], 1e-9);
            EXPECT_NEAR(ak[j], a[j], 1e-9);
        }
    }
}

TEST(Grpo, ClipCases) {
    EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
    EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
    EXPECT_DOUBLE_EQ(clipped_surrogate(1.1, 2.0, 0.2), 2.2);
}

TEST(GrpoProperty, ClippedNeverExceedsUnclipped) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 10000; ++i) {
        const double rho = std::exp(u(rng)), a = u(rng);
        EXPECT_LE(clipped_surrogate(rho, a, 0.2), rho * a);
    }
}

TEST(Grpo, ObjectiveAtUnitRatio) {
    RolloutGroup g;
    for (double r : {1.0, 4.0, 2.0, 0.0})
        g.samples.push_back({r, -3.0, -3.0, -3.0, 0.0});
    RewardConfig cfg;
    cfg.beta = 0.0;
    const auto adv = group_advantages(g.rewards());
    const auto obj = grpo_objective(g, adv, cfg);
    EXPECT_NEAR(obj.loss, 0.0, 1e-15);
    ASSERT_EQ(obj.clipped_terms.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_DOUBLE_EQ(obj.clipped_terms[i], adv[i]);
}

TEST(Grpo, ObjectiveTermsAndKl) {
    RolloutGroup g;
    g.samples.push_back({0, std::log(1.5), 0.0, 0.0, 0.2});
    g.samples.push_back({0, std::log(0.5), 0.0, 0.0, 0.4});
    const std::vector<double> adv{1.0, -1.0};
    RewardConfig cfg;
    cfg.beta = 0.5;
    const auto obj = grpo_objective(g, adv, cfg);
    EXPECT_NEAR(obj.clipped_terms[0], 1.2, 1e-12);
    EXPECT_NEAR(obj.clipped_terms[1], -0.8, 1e-12);
    EXPECT_NEAR(obj.kl, 0.3, 1e-15);
    EXPECT_NEAR(obj.loss, -(1.2 - 0.8) / 2 + 0.5 * 0.3, 1e-12);
}

TEST(Grpo, RatioClampAndErrors) {
    EXPECT_DOUBLE_EQ(policy_ratio(100.0, 0.0), std::exp(20.0));
    EXPECT_DOUBLE_EQ(policy_ratio(-100.0, 0.0), std::exp(-20.0));
    EXPECT_THROW(policy_ratio(NAN, 0.0), InvalidArgument);
    RolloutGroup g;
    g.samples.push_back({0, INFINITY, 0, 0, 0});
    g.samples.push_back({0, 0, 0, 0, 0});
    EXPECT_THROW(grpo_objective(g, std::vector<double>{0, 0}, RewardConfig{}), InvalidArgument);
    g.samples[0].logp_new = 0;
    EXPECT_THROW(grpo_objective(g, std::vector<double>{0}, RewardConfig{}), InvalidArgument);
}

TEST(RewardConfig, Validation) {
    RewardConfig c;
    EXPECT_NO_THROW(c.validate());
    c.clip = 1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = RewardConfig{};
    c.huber_delta = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = RewardConfig{};
    c.weights[2] = -1;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = RewardConfig{};
    c.beta = -1;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
