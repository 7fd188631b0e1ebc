#pragma once

#include "common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

inline constexpr std::size_t kRubricDims = 6;

/// Per-dimension maxima of the raw rubric scores.
inline constexpr std::array<double, kRubricDims> kRubricMax{3, 2, 1, 1, 1, 2};

using RubricArray = std::array<double, kRubricDims>;

/// Raw rubric scores, each in [0, r_max].
struct ScoreVector {
    RubricArray values{};
    bool operator==(const ScoreVector&) const = default;
};

/// Rubric scores divided by their maxima, each in [0, 1].
struct NormalizedScores {
    RubricArray values{};
    bool operator==(const NormalizedScores&) const = default;
};

struct RewardConfig {
    RubricArray weights{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    RubricArray lambdas{1, 1, 1, 1, 1, 1};
    double huber_delta = 0.5;
    double clip = 0.2;
    double beta = 0.01;
    double std_guard = 1e-8;

    void validate() const {
        for (std::size_t k = 0; k < kRubricDims; ++k) {
            if (!(weights[k] >= 0.0) || !std::isfinite(weights[k]))
                throw InvalidArgument("reward: weight " + std::to_string(k) + " must be finite and >= 0");
            if (!(lambdas[k] >= 0.0) || !std::isfinite(lambdas[k]))
                throw InvalidArgument("reward: lambda " + std::to_string(k) + " must be finite and >= 0");
        }
        if (!(huber_delta > 0.0))
            throw InvalidArgument("reward: huber_delta must be > 0");
        if (!(clip > 0.0 && clip < 1.0))
            throw InvalidArgument("reward: clip must lie in (0,1)");
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw InvalidArgument("reward: beta must be finite and >= 0");
        if (!(std_guard >= 0.0))
            throw InvalidArgument("reward: std_guard must be >= 0");
    }

    bool operator==(const RewardConfig&) const = default;
};

inline NormalizedScores normalize_scores(const ScoreVector& raw) {
    NormalizedScores s;
    for (std::size_t k = 0; k < kRubricDims; ++k) {
        const double r = raw.values[k];
        if (!(r >= 0.0 && r <= kRubricMax[k]))
            throw InvalidArgument("reward: raw score " + std::to_string(r) + " outside [0," +
                                  std::to_string(kRubricMax[k]) + "] in dim " + std::to_string(k));
        s.values[k] = r / kRubricMax[k];
    }
    return s;
}

inline double composite_reward(const NormalizedScores& s, const RubricArray& w) {
    double r = 0.0;
    for (std::size_t k = 0; k < kRubricDims; ++k)
        r += w[k] * s.values[k];
    return r;
}

inline double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

/// Sum over dimensions of lambda_k * Huber(student_k - teacher_k).
inline double distill_loss(const NormalizedScores& student, const NormalizedScores& teacher, const RubricArray& lambda,
                           double delta) {
    if (!(delta > 0.0))
        throw InvalidArgument("reward: huber delta must be > 0");
    double loss = 0.0;
    for (std::size_t k = 0; k < kRubricDims; ++k)
        loss += lambda[k] * huber(student.values[k] - teacher.values[k], delta);
    return loss;
}

/// (R - mean) / std with the population standard deviation; all zeros when std <= guard.
inline std::vector<double> group_advantages(std::span<const double> rewards, double std_guard = 1e-8) {
    if (rewards.size() < 2)
        throw InvalidArgument("reward: group size must be >= 2, got " + std::to_string(rewards.size()));
    double mean = 0.0;
    for (double r : rewards) {
        if (!std::isfinite(r))
            throw InvalidArgument("reward: non-finite reward");
        mean += r;
    }
    mean /= double(rewards.size());
    double var = 0.0;
    for (double r : rewards)
        var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / double(rewards.size()));
    std::vector<double> adv(rewards.size(), 0.0);
    if (sd <= std_guard)
        return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i)
        adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

/// Log-ratio bound applied before exponentiation.
inline constexpr double kLogRatioClamp = 20.0;

inline double policy_ratio(double logp_new, double logp_old) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_old))
        throw InvalidArgument("grpo: non-finite log-probability");
    return std::exp(std::clamp(logp_new - logp_old, -kLogRatioClamp, kLogRatioClamp));
}

/// min(rho A, clip(rho, 1-eps, 1+eps) A).
inline double clipped_surrogate(double rho, double advantage, double clip) {
    return std::min(rho * advantage, std::clamp(rho, 1.0 - clip, 1.0 + clip) * advantage);
}

/// True when the unclipped branch attains the minimum and the log-ratio is not clamped,
/// i.e. when the term depends on the new policy.
inline bool surrogate_active(double logp_new, double logp_old, double advantage, double clip) {
    const double d = logp_new - logp_old;
    if (d < -kLogRatioClamp || d > kLogRatioClamp)
        return false;
    const double rho = std::exp(d);
    return rho * advantage <= std::clamp(rho, 1.0 - clip, 1.0 + clip) * advantage;
}

struct RolloutSample {
    double reward = 0.0;
    double logp_new = 0.0;
    double logp_old = 0.0;
    double logp_ref = 0.0;
    /// KL of the current policy to the reference along this rollout.
    double kl = 0.0;
};

struct RolloutGroup {
    std::vector<RolloutSample> samples;

    std::vector<double> rewards() const {
        std::vector<double> r;
        r.reserve(samples.size());
        for (const auto& s : samples)
            r.push_back(s.reward);
        return r;
    }
};

struct GrpoObjective {
    double loss = 0.0;
    std::vector<double> clipped_terms;
    double kl = 0.0;
};

/// -(1/G) sum min(rho A, clip(rho) A) + beta KL, with KL the group mean of the per-rollout KL.
inline GrpoObjective grpo_objective(const RolloutGroup& group, std::span<const double> advantages,
                                    const RewardConfig& cfg) {
    cfg.validate();
    const std::size_t g = group.samples.size();
    if (g == 0 || advantages.size() != g)
        throw InvalidArgument("grpo: advantages length " + std::to_string(advantages.size()) + " != group size " +
                              std::to_string(g));
    GrpoObjective out;
    out.clipped_terms.reserve(g);
    double surrogate = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        const auto& s = group.samples[i];
        if (!std::isfinite(s.logp_ref) || !std::isfinite(s.kl))
            throw InvalidArgument("grpo: non-finite log-probability");
        const double term = clipped_surrogate(policy_ratio(s.logp_new, s.logp_old), advantages[i], cfg.clip);
        out.clipped_terms.push_back(term);
        surrogate += term;
        out.kl += s.kl;
    }
    out.kl /= double(g);
    out.loss = -surrogate / double(g) + cfg.beta * out.kl;
    return out;
}

} // namespace wmtok
