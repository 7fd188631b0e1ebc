#pragma once

#include "common.hpp"
#include "seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

struct DriftParams {
    double eps = 0.01;
    double delta_q = 0.05;
    double alpha = 0.5;
    int window = 6;
    int horizon = 30;

    void validate() const {
        if (!(eps >= 0.0) || !std::isfinite(eps))
            throw InvalidArgument("drift: eps must be finite and >= 0");
        if (!(delta_q >= 0.0) || !std::isfinite(delta_q))
            throw InvalidArgument("drift: delta_q must be finite and >= 0");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw InvalidArgument("drift: alpha must lie in [0,1]");
        if (window < 1)
            throw InvalidArgument("drift: window must be >= 1");
        if (horizon < 1)
            throw InvalidArgument("drift: horizon must be >= 1");
    }

    double alpha_w() const { return std::pow(alpha, window); }

    bool operator==(const DriftParams&) const = default;
};

/// (W eps + delta_q) / (1 - alpha^W).
inline double eta_fixed_point(const DriftParams& p) {
    p.validate();
    const double aw = p.alpha_w();
    if (!(aw < 1.0))
        throw InvalidArgument("drift: fixed point undefined for alpha^W >= 1");
    return (p.window * p.eps + p.delta_q) / (1.0 - aw);
}

/// W eps + (W eps + delta_q) / (1 - alpha^W).
inline double swr_bound(const DriftParams& p) {
    p.validate();
    if (!(p.alpha_w() < 1.0))
        throw InvalidArgument("drift: SWR bound undefined for alpha = 1");
    return p.window * p.eps + eta_fixed_point(p);
}

/// eps (1 - alpha^T) / (1 - alpha), or T eps when alpha = 1.
inline double ar_bound(const DriftParams& p, int horizon) {
    p.validate();
    if (horizon < 1)
        throw InvalidArgument("drift: horizon must be >= 1");
    if (p.alpha == 1.0)
        return horizon * p.eps;
    return p.eps * (1.0 - std::pow(p.alpha, horizon)) / (1.0 - p.alpha);
}

struct DriftTrajectory {
    std::vector<double> eta;
    std::vector<double> step_error;
    double eta_star = std::numeric_limits<double>::infinity();
};

/// Worst-case recurrence: eta_1 = 0, eta_{k+1} = W eps + alpha^W eta_k + delta_q;
/// within segment k, e_j = alpha e_{j-1} + eps starting from e_0 = eta_k.
inline DriftTrajectory simulate_recurrence(const DriftParams& p, int segments) {
    p.validate();
    if (segments < 1)
        throw InvalidArgument("drift: segments must be >= 1");
    DriftTrajectory t;
    if (p.alpha_w() < 1.0)
        t.eta_star = eta_fixed_point(p);
    const double aw = p.alpha_w();
    double eta = 0.0;
    for (int k = 0; k < segments; ++k) {
        t.eta.push_back(eta);
        double e = eta;
        for (int j = 0; j < p.window; ++j) {
            e = p.alpha * e + p.eps;
            t.step_error.push_back(e);
        }
        eta = p.window * p.eps + aw * eta + p.delta_q;
    }
    return t;
}

struct DriftEnvelopes {
    std::vector<double> ar;
    std::vector<double> swr;
    std::optional<double> bound;
    int violating_trials = 0;

    double ar_max() const { return ar.empty() ? 0.0 : *std::max_element(ar.begin(), ar.end()); }
    double swr_max() const { return swr.empty() ? 0.0 : *std::max_element(swr.begin(), swr.end()); }
};

/// Relative slack allowed when comparing simulated errors against the analytic bound.
inline constexpr double kBoundSlack = 1e-12;

/// Stochastic process e_t = alpha e_{t-1} + u_t with u_t ~ U[0, eps]. The SWR
/// process restarts each segment from eta_k, where eta_{k+1} is the error at the
/// end of segment k plus delta_q. Both processes share the noise draws of a
/// trial. Envelopes are per-step maxima over trials.
inline DriftEnvelopes simulate_empirical(const DriftParams& p, int horizon, int trials, std::uint64_t seed) {
    p.validate();
    if (horizon < 1 || trials < 1)
        throw InvalidArgument("drift: horizon and trials must be >= 1");
    DriftEnvelopes env;
    env.ar.assign(std::size_t(horizon), 0.0);
    env.swr.assign(std::size_t(horizon), 0.0);
    if (p.alpha_w() < 1.0)
        env.bound = swr_bound(p);
    const double limit = env.bound ? *env.bound * (1.0 + kBoundSlack) : 0.0;
    std::uniform_real_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = derive_rng(seed, "drift/trial/" + std::to_string(trial));
        double ar = 0.0, swr = 0.0;
        bool violated = false;
        for (int t = 0; t < horizon; ++t) {
            if (t > 0 && t % p.window == 0)
                swr += p.delta_q;
            const double u = p.eps * noise(rng);
            ar = p.alpha * ar + u;
            swr = p.alpha * swr + u;
            env.ar[std::size_t(t)] = std::max(env.ar[std::size_t(t)], ar);
            env.swr[std::size_t(t)] = std::max(env.swr[std::size_t(t)], swr);
            if (env.bound && swr > limit)
                violated = true;
        }
        env.violating_trials += violated;
    }
    return env;
}

struct SweepRow {
    int window = 0;
    double bound = 0.0;
    double empirical_max = 0.0;
    double eta_star = 0.0;
};

inline std::vector<SweepRow> sweep_window(const DriftParams& p, std::span<const int> windows, int horizon, int trials,
                                          std::uint64_t seed) {
    if (windows.empty())
        throw InvalidArgument("drift: empty window list");
    std::vector<SweepRow> rows;
    for (int w : windows) {
        DriftParams q = p;
        q.window = w;
        q.horizon = horizon;
        const DriftEnvelopes env = simulate_empirical(q, horizon, trials, seed);
        rows.push_back({w, swr_bound(q), env.swr_max(), eta_fixed_point(q)});
    }
    return rows;
}

} // namespace wmtok
