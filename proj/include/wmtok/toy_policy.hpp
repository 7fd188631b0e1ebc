#pragma once

#include "common.hpp"
#include "reward.hpp"
#include "seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

/// First-order Markov categorical policy over a small vocabulary. Parameters are
/// start logits [v] and transition logits [v x v] (row = previous token).
class TabularPolicy {
public:
    TabularPolicy() = default;
    explicit TabularPolicy(int vocab) : vocab_(vocab) {
        if (vocab < 1)
            throw InvalidArgument("policy: vocabulary must be non-empty");
        params_.assign(std::size_t(vocab) + std::size_t(vocab) * vocab, 0.0);
    }

    static TabularPolicy uniform(int vocab) { return TabularPolicy(vocab); }

    /// Logits drawn from N(0, scale^2).
    static TabularPolicy random(int vocab, Rng& rng, double scale = 1.0) {
        TabularPolicy p(vocab);
        std::normal_distribution<double> n(0.0, scale);
        for (auto& x : p.params_)
            x = n(rng);
        return p;
    }

    int vocab() const { return vocab_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    double& start_logit(int k) { return params_[std::size_t(k)]; }
    double start_logit(int k) const { return params_[std::size_t(k)]; }
    double& logit(int prev, int next) { return params_[std::size_t(vocab_) * (1 + prev) + next]; }
    double logit(int prev, int next) const { return params_[std::size_t(vocab_) * (1 + prev) + next]; }

    /// Logit row for the next token; prev < 0 selects the start distribution.
    std::span<const double> row(int prev) const {
        return std::span<const double>(params_).subspan(std::size_t(vocab_) * (prev < 0 ? 0 : 1 + prev), vocab_);
    }

    std::vector<double> log_probs(int prev) const {
        auto r = row(prev);
        const double m = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double x : r)
            z += std::exp(x - m);
        const double lz = m + std::log(z);
        std::vector<double> out(r.size());
        for (std::size_t k = 0; k < r.size(); ++k)
            out[k] = r[k] - lz;
        return out;
    }

    std::vector<double> probs(int prev) const {
        auto lp = log_probs(prev);
        for (auto& x : lp)
            x = std::exp(x);
        return lp;
    }

    void check_token(int t) const {
        if (t < 0 || t >= vocab_)
            throw InvalidArgument("policy: token " + std::to_string(t) + " outside vocabulary of " +
                                  std::to_string(vocab_));
    }

    bool operator==(const TabularPolicy&) const = default;

private:
    int vocab_ = 0;
    std::vector<double> params_;
};

inline double log_prob(const TabularPolicy& policy, std::span<const int> seq) {
    double lp = 0.0;
    int prev = -1;
    for (int t : seq) {
        policy.check_token(t);
        lp += policy.log_probs(prev)[std::size_t(t)];
        prev = t;
    }
    return lp;
}

/// Sum over positions of KL(policy || reference) of the next-token distributions
/// along the prefixes of seq.
inline double sequence_kl(const TabularPolicy& policy, const TabularPolicy& reference, std::span<const int> seq) {
    if (policy.vocab() != reference.vocab())
        throw InvalidArgument("policy: reference vocabulary differs");
    double kl = 0.0;
    int prev = -1;
    for (int t : seq) {
        policy.check_token(t);
        const auto lp = policy.log_probs(prev), lq = reference.log_probs(prev);
        for (std::size_t k = 0; k < lp.size(); ++k)
            kl += std::exp(lp[k]) * (lp[k] - lq[k]);
        prev = t;
    }
    return kl;
}

struct PolicyRollout {
    std::vector<int> tokens;
    double log_prob = 0.0;
};

inline PolicyRollout sample_rollout(const TabularPolicy& policy, int length, Rng& rng) {
    if (length < 1)
        throw InvalidArgument("policy: rollout length must be >= 1");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PolicyRollout r;
    int prev = -1;
    for (int i = 0; i < length; ++i) {
        const auto p = policy.probs(prev);
        double x = u(rng), acc = 0.0;
        int pick = policy.vocab() - 1;
        for (int k = 0; k < policy.vocab(); ++k) {
            acc += p[std::size_t(k)];
            if (x < acc) {
                pick = k;
                break;
            }
        }
        r.tokens.push_back(pick);
        prev = pick;
    }
    r.log_prob = log_prob(policy, r.tokens);
    return r;
}

/// Sampled rollouts with their advantages and behaviour-policy log-probabilities.
struct GrpoBatch {
    std::vector<std::vector<int>> sequences;
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> logp_old;

    void validate() const {
        const std::size_t g = sequences.size();
        if (g < 1 || advantages.size() != g || logp_old.size() != g)
            throw InvalidArgument("grpo: batch fields have inconsistent sizes");
    }
};

inline RolloutGroup make_group(const TabularPolicy& policy, const TabularPolicy& reference, const GrpoBatch& batch) {
    batch.validate();
    RolloutGroup g;
    for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
        const auto& x = batch.sequences[i];
        g.samples.push_back({i < batch.rewards.size() ? batch.rewards[i] : 0.0, log_prob(policy, x), batch.logp_old[i],
                             log_prob(reference, x), sequence_kl(policy, reference, x)});
    }
    return g;
}

inline GrpoObjective grpo_loss(const TabularPolicy& policy, const TabularPolicy& reference, const GrpoBatch& batch,
                               const RewardConfig& cfg) {
    return grpo_objective(make_group(policy, reference, batch), batch.advantages, cfg);
}

/// Gradient tables with the same layout as TabularPolicy parameters.
struct PolicyGradient {
    std::vector<double> values;

    double norm() const {
        double s = 0.0;
        for (double v : values)
            s += v * v;
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values)
            m = std::max(m, std::abs(v));
        return m;
    }
};

/// Analytic gradient of the GRPO loss with respect to all logits. Clipped or
/// ratio-clamped terms contribute nothing.
inline PolicyGradient grpo_gradient(const TabularPolicy& policy, const TabularPolicy& reference, const GrpoBatch& batch,
                                    const RewardConfig& cfg) {
    cfg.validate();
    batch.validate();
    if (policy.vocab() != reference.vocab())
        throw InvalidArgument("policy: reference vocabulary differs");
    const int v = policy.vocab();
    const double inv_g = 1.0 / double(batch.sequences.size());
    PolicyGradient grad{std::vector<double>(policy.parameter_count(), 0.0)};
    auto row_offset = [v](int prev) { return std::size_t(v) * (prev < 0 ? 0 : 1 + prev); };

    for (std::size_t j = 0; j < batch.sequences.size(); ++j) {
        const auto& x = batch.sequences[j];
        const double lp = log_prob(policy, x);
        const double a = batch.advantages[j];
        const double coef = surrogate_active(lp, batch.logp_old[j], a, cfg.clip)
                                ? -inv_g * a * policy_ratio(lp, batch.logp_old[j])
                                : 0.0;
        int prev = -1;
        for (int t : x) {
            const auto lpn = policy.log_probs(prev);
            const std::size_t off = row_offset(prev);
            if (coef != 0.0) {
                for (int k = 0; k < v; ++k)
                    grad.values[off + k] -= coef * std::exp(lpn[std::size_t(k)]);
                grad.values[off + std::size_t(t)] += coef;
            }
            if (cfg.beta != 0.0) {
                const auto lq = reference.log_probs(prev);
                double kl_row = 0.0;
                for (int k = 0; k < v; ++k)
                    kl_row += std::exp(lpn[std::size_t(k)]) * (lpn[std::size_t(k)] - lq[std::size_t(k)]);
                for (int k = 0; k < v; ++k) {
                    const double pk = std::exp(lpn[std::size_t(k)]);
                    grad.values[off + k] +=
                        cfg.beta * inv_g * pk * (lpn[std::size_t(k)] - lq[std::size_t(k)] - kl_row);
                }
            }
            prev = t;
        }
    }
    for (double g : grad.values)
        if (!std::isfinite(g))
            throw InvalidArgument("grpo: non-finite gradient");
    return grad;
}

/// Max-norm relative error between the analytic gradient and central differences of grpo_loss.
inline double gradient_check_error(const TabularPolicy& policy, const TabularPolicy& reference, const GrpoBatch& batch,
                                   const RewardConfig& cfg, double h = 1e-5) {
    const PolicyGradient analytic = grpo_gradient(policy, reference, batch, cfg);
    TabularPolicy probe = policy;
    std::vector<double> fd(policy.parameter_count());
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double x = probe.parameters()[i];
        probe.parameters()[i] = x + h;
        const double up = grpo_loss(probe, reference, batch, cfg).loss;
        probe.parameters()[i] = x - h;
        const double down = grpo_loss(probe, reference, batch, cfg).loss;
        probe.parameters()[i] = x;
        fd[i] = (up - down) / (2 * h);
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        diff = std::max(diff, std::abs(analytic.values[i] - fd[i]));
        scale = std::max(scale, std::abs(fd[i]));
    }
    return diff / std::max(scale, 1e-12);
}

/// Exact expected number of occurrences of `token` in a rollout of the given length.
inline double expected_token_count(const TabularPolicy& policy, int length, int token) {
    policy.check_token(token);
    const int v = policy.vocab();
    std::vector<double> m = policy.probs(-1);
    std::vector<double> next(std::size_t(v), 0.0);
    double total = 0.0;
    for (int i = 0; i < length; ++i) {
        total += m[std::size_t(token)];
        std::fill(next.begin(), next.end(), 0.0);
        for (int a = 0; a < v; ++a) {
            const auto p = policy.probs(a);
            for (int b = 0; b < v; ++b)
                next[std::size_t(b)] += m[std::size_t(a)] * p[std::size_t(b)];
        }
        m.swap(next);
    }
    return total;
}

using RewardFn = std::function<double(std::span<const int>)>;

struct TrainConfig {
    int group_size = 16;
    int iterations = 200;
    int length = 8;
    double lr = 0.1;
    int updates_per_iteration = 1;
    RewardConfig reward;

    void validate() const {
        if (group_size < 2)
            throw InvalidArgument("train: group size must be >= 2");
        if (iterations < 0)
            throw InvalidArgument("train: iterations must be >= 0");
        if (length < 1)
            throw InvalidArgument("train: rollout length must be >= 1");
        if (!(lr >= 0.0) || !std::isfinite(lr))
            throw InvalidArgument("train: learning rate must be finite and >= 0");
        if (updates_per_iteration < 1)
            throw InvalidArgument("train: updates per iteration must be >= 1");
        reward.validate();
    }

    bool operator==(const TrainConfig&) const = default;
};

struct TrainRecord {
    int iteration = 0;
    double mean_reward = 0.0;
    double kl = 0.0;
    double grad_norm = 0.0;
};

/// Called before each iteration; may replace the reward function.
using RewardSchedule = std::function<void(int iteration, RewardFn& reward)>;

/// GRPO loop: the reference is the initial policy, the behaviour policy is
/// re-synchronized to the current policy at the start of every iteration.
inline std::vector<TrainRecord> train(TabularPolicy& policy, RewardFn reward, const TrainConfig& cfg,
                                      std::uint64_t seed, const RewardSchedule& schedule = {}) {
    cfg.validate();
    const TabularPolicy reference = policy;
    Rng rng = derive_rng(seed, "grpo/sampling");
    std::vector<TrainRecord> history;
    for (int it = 0; it < cfg.iterations; ++it) {
        if (schedule)
            schedule(it, reward);
        const TabularPolicy old = policy;
        GrpoBatch batch;
        for (int j = 0; j < cfg.group_size; ++j) {
            PolicyRollout r = sample_rollout(old, cfg.length, rng);
            batch.rewards.push_back(reward(r.tokens));
            batch.logp_old.push_back(r.log_prob);
            batch.sequences.push_back(std::move(r.tokens));
        }
        batch.advantages = group_advantages(batch.rewards, cfg.reward.std_guard);
        TrainRecord rec;
        rec.iteration = it;
        for (double r : batch.rewards)
            rec.mean_reward += r;
        rec.mean_reward /= double(cfg.group_size);
        for (int u = 0; u < cfg.updates_per_iteration; ++u) {
            const PolicyGradient g = grpo_gradient(policy, reference, batch, cfg.reward);
            if (u == 0) {
                rec.grad_norm = g.norm();
                rec.kl = grpo_loss(policy, reference, batch, cfg.reward).kl;
            }
            auto params = policy.parameters();
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] -= cfg.lr * g.values[i];
        }
        history.push_back(rec);
    }
    return history;
}

} // namespace wmtok
