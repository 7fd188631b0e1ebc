#pragma once

#include "action_codec.hpp"
#include "common.hpp"
#include "frame.hpp"
#include "seed.hpp"
#include "synthetic_world.hpp"
#include "token_sequence.hpp"

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

/// Frame codec: pixels to (context, dynamics) indices in [0,K) and back.
template <class C>
concept FrameCodec = requires(const C& c, const Frame& f, std::span<const std::uint32_t> t) {
    { c.encode(f) } -> std::same_as<EncodedFrame>;
    { c.decode(t, t) } -> std::same_as<Frame>;
    { c.context_tokens() } -> std::convertible_to<std::size_t>;
    { c.dynamics_tokens() } -> std::convertible_to<std::size_t>;
    { c.codebook_size() } -> std::convertible_to<std::uint32_t>;
};

/// Next-block predictor: prompt tokens and the 1-based target frame index to N_d indices.
template <class P>
concept TokenPredictor = requires(P& p, std::span<const TokenId> prompt, int step, Rng& rng) {
    { p.predict(prompt, step, rng) } -> std::same_as<std::vector<std::uint32_t>>;
};

struct DecodeMode {
    enum class Kind { Autoregressive, SlidingWindow };
    Kind kind = Kind::SlidingWindow;
    int window = 6;

    static DecodeMode autoregressive() { return {Kind::Autoregressive, 0}; }
    static DecodeMode sliding(int w) {
        if (w < 1)
            throw InvalidArgument("decode mode: window must be >= 1");
        return {Kind::SlidingWindow, w};
    }

    /// Effective window for a horizon of T frames.
    int window_for(int horizon) const { return kind == Kind::Autoregressive ? horizon : std::min(window, horizon); }
};

class RolloutError : public Error {
public:
    RolloutError(int step, const std::string& what)
        : Error("rollout step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

struct StepRecord {
    int step = 0;
    std::size_t prompt_len = 0;
    bool reencoded = false;
};

struct ReencodeEvent {
    int after_step = 0;
    double wall_seconds = 0.0;
};

struct RolloutTrace {
    std::vector<StepRecord> steps;
    std::vector<ReencodeEvent> reencodes;
    std::vector<int> segment_starts;

    std::size_t max_prompt() const {
        std::size_t m = 0;
        for (const auto& s : steps)
            m = std::max(m, s.prompt_len);
        return m;
    }

    double mean_prompt() const {
        if (steps.empty())
            return 0.0;
        double sum = 0.0;
        for (const auto& s : steps)
            sum += double(s.prompt_len);
        return sum / double(steps.size());
    }

    std::size_t reencode_count() const { return reencodes.size(); }
};

struct RolloutResult {
    Clip frames;
    RolloutTrace trace;
};

namespace detail {

inline void append(std::vector<TokenId>& prompt, std::span<const std::uint32_t> ids, TokenId offset) {
    for (auto t : ids)
        prompt.push_back(t + offset);
}

inline void reseed_prompt(std::vector<TokenId>& prompt, const EncodedFrame& enc, const ActionTokenBlock& action,
                          std::uint32_t k) {
    prompt.clear();
    append(prompt, enc.context, k);
    append(prompt, enc.dynamics, 0);
    prompt.insert(prompt.end(), action.ids.begin(), action.ids.end());
}

} // namespace detail

/// Windowed decoding loop. Segments hold at most W generated frames; after each
/// non-final segment the last decoded frame is re-encoded and seeds a fresh
/// prompt [ctx | dyn_0 | a]. Action block actions[s] conditions frame s+1.
template <TokenPredictor P, FrameCodec C>
RolloutResult decode_windowed(P& predictor, const C& codec, const Frame& x0, std::span<const ActionTokenBlock> actions,
                              int horizon, int window, const VocabLayout& layout, Rng& rng) {
    if (horizon < 1)
        throw InvalidArgument("rollout: horizon must be >= 1");
    if (window < 1)
        throw InvalidArgument("rollout: window must be >= 1");
    if (actions.size() < std::size_t(horizon))
        throw InvalidArgument("rollout: " + std::to_string(actions.size()) + " action blocks for horizon " +
                              std::to_string(horizon));
    if (layout.codebook != codec.codebook_size())
        throw InvalidArgument("rollout: layout K differs from codec K");
    const std::size_t da = actions.front().ids.size();
    for (int s = 0; s < horizon; ++s) {
        const auto& a = actions[std::size_t(s)];
        if (a.ids.size() != da || da == 0)
            throw InvalidArgument("rollout: inconsistent action block size at step " + std::to_string(s + 1));
        for (auto id : a.ids)
            if (id < layout.action_begin() || id >= layout.bos())
                throw InvalidArgument("rollout: token " + std::to_string(id) + " is not an action token");
    }
    const std::size_t nd = codec.dynamics_tokens();
    const std::uint32_t k = codec.codebook_size();

    RolloutResult out;
    out.frames.reserve(std::size_t(horizon));
    out.trace.steps.reserve(std::size_t(horizon));

    EncodedFrame enc = codec.encode(x0);
    std::vector<std::uint32_t> ctx = enc.context;
    std::vector<TokenId> prompt;
    prompt.reserve(codec.context_tokens() + std::size_t(std::min(window, horizon)) * (nd + da));
    detail::reseed_prompt(prompt, enc, actions[0], k);

    int done = 0;
    while (done < horizon) {
        const int w = std::min(window, horizon - done);
        out.trace.segment_starts.push_back(done + 1);
        for (int j = 0; j < w; ++j) {
            const int step = done + j + 1;
            out.trace.steps.push_back({step, prompt.size(), false});
            std::vector<std::uint32_t> dyn;
            try {
                dyn = predictor.predict(std::span<const TokenId>(prompt), step, rng);
            } catch (const std::exception& e) {
                throw RolloutError(step, e.what());
            }
            if (dyn.size() != nd)
                throw RolloutError(step, "predictor returned " + std::to_string(dyn.size()) + " tokens, expected " +
                                             std::to_string(nd));
            for (auto t : dyn)
                if (t >= k)
                    throw RolloutError(step, "predictor returned index " + std::to_string(t) + " >= K");
            out.frames.push_back(codec.decode(ctx, dyn));
            if (j + 1 < w) {
                detail::append(prompt, dyn, 0);
                const auto& a = actions[std::size_t(step)];
                prompt.insert(prompt.end(), a.ids.begin(), a.ids.end());
            }
        }
        done += w;
        if (done < horizon) {
            const auto t0 = std::chrono::steady_clock::now();
            enc = codec.encode(out.frames.back());
            const auto t1 = std::chrono::steady_clock::now();
            ctx = enc.context;
            detail::reseed_prompt(prompt, enc, actions[std::size_t(done)], k);
            out.trace.steps.back().reencoded = true;
            out.trace.reencodes.push_back({done, std::chrono::duration<double>(t1 - t0).count()});
        }
    }
    return out;
}

/// Conditions every step on all previously generated tokens and the original context.
template <TokenPredictor P, FrameCodec C>
RolloutResult decode_ar(P& predictor, const C& codec, const Frame& x0, std::span<const ActionTokenBlock> actions,
                        int horizon, const VocabLayout& layout, Rng& rng) {
    return decode_windowed(predictor, codec, x0, actions, horizon, std::max(horizon, 1), layout, rng);
}

/// Sliding-window re-encoding: ceil(T/W) segments, ceil(T/W)-1 re-encodings.
template <TokenPredictor P, FrameCodec C>
RolloutResult decode_swr(P& predictor, const C& codec, const Frame& x0, std::span<const ActionTokenBlock> actions,
                         int horizon, int window, const VocabLayout& layout, Rng& rng) {
    return decode_windowed(predictor, codec, x0, actions, horizon, window, layout, rng);
}

template <TokenPredictor P, FrameCodec C>
RolloutResult decode(P& predictor, const C& codec, const Frame& x0, std::span<const ActionTokenBlock> actions,
                     int horizon, DecodeMode mode, const VocabLayout& layout, Rng& rng) {
    return decode_windowed(predictor, codec, x0, actions, horizon, mode.window_for(horizon), layout, rng);
}

struct PromptProfile {
    std::size_t max = 0;
    double mean = 0.0;
    int reencodings = 0;
};

/// Analytic prompt lengths: relative step j of a segment sees N_c + N_d + D_a + j (N_d + D_a) tokens.
inline PromptProfile prompt_length_profile(const ClipSpec& spec, int horizon, DecodeMode mode) {
    if (horizon < 1)
        throw InvalidArgument("prompt profile: horizon must be >= 1");
    if (spec.context_tokens < 1 || spec.dynamics_tokens < 1 || spec.action_dims < 1)
        throw InvalidArgument("prompt profile: token counts must be positive");
    const int w = mode.window_for(horizon);
    const double base = double(spec.context_tokens) + spec.dynamics_tokens + spec.action_dims;
    const double block = double(spec.dynamics_tokens) + spec.action_dims;
    const int full = horizon / w, rest = horizon % w;
    auto segment_sum = [&](int len) { return len * base + block * double(len) * (len - 1) / 2.0; };
    PromptProfile p;
    p.max = static_cast<std::size_t>(base + (w - 1) * block);
    p.mean = (full * segment_sum(w) + segment_sum(rest)) / horizon;
    p.reencodings = (horizon + w - 1) / w - 1;
    return p;
}

} // namespace wmtok
