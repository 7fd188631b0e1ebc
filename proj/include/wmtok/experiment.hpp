#pragma once

#include "action_codec.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "rollout.hpp"
#include "seed.hpp"
#include "synthetic_world.hpp"
#include "token_sequence.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace wmtok {

inline ToyTokenizerConfig tokenizer_config(const WorldConfig& w) {
    ToyTokenizerConfig t;
    t.height = w.height;
    t.width = w.width;
    t.ctx_patch = w.ctx_patch;
    t.dyn_patch = w.dyn_patch;
    t.levels = fsq::Levels::parse(w.levels);
    t.validate();
    return t;
}

/// World preset whose token counts match the full-size clip (N_c=1280, N_d=80, D_a=13, K=4375).
inline WorldConfig full_scale_world() {
    WorldConfig w;
    w.height = 256;
    w.width = 320;
    w.extent = 32;
    w.stride = 32;
    w.ctx_patch = 8;
    w.dyn_patch = 32;
    w.levels = "7,5,5,5,5";
    w.action_dims = 13;
    return w;
}

/// Range table for move actions: dimension 0 carries the move id, the rest are zero.
inline ActionRangeTable move_table(int action_dims, int bins) {
    ActionRangeTable t;
    t.min.assign(std::size_t(action_dims), 0.0);
    t.max.assign(std::size_t(action_dims), 0.0);
    t.max[0] = kMoveCount - 1;
    t.bins = bins;
    t.validate();
    return t;
}

struct Episode {
    /// x_0 .. x_T.
    Clip frames;
    std::vector<int> moves;
    /// actions[s] conditions frame s+1.
    std::vector<ActionTokenBlock> actions;
    /// Ground-truth dynamics tokens of frames 1..T.
    std::vector<std::vector<std::uint32_t>> truth;
};

/// Random start position on the stride lattice and uniformly random moves.
inline Episode make_episode(const WorldConfig& w, const ToyTokenizer& tok, const VocabLayout& layout, int horizon,
                            std::uint64_t seed) {
    Rng rng = derive_rng(seed, "world/episode");
    WorldState s;
    s.height = w.height;
    s.width = w.width;
    s.extent = w.extent;
    s.stride = w.stride;
    s.background = w.background;
    std::uniform_int_distribution<int> rows(0, (w.height - w.extent) / w.stride),
        cols(0, (w.width - w.extent) / w.stride), mv(0, kMoveCount - 1);
    s.row = rows(rng) * w.stride;
    s.col = cols(rng) * w.stride;
    s.validate();
    const ActionRangeTable table = move_table(w.action_dims, int(layout.action_bins));
    Episode ep;
    ep.frames.push_back(render(s));
    for (int t = 0; t < horizon; ++t) {
        const int m = mv(rng);
        std::vector<double> a(std::size_t(w.action_dims), 0.0);
        a[0] = m;
        ep.moves.push_back(m);
        ep.actions.push_back(discretize(a, table, layout.action_begin()));
        s = step(s, m);
        ep.frames.push_back(render(s));
        ep.truth.push_back(tok.encode(ep.frames.back()).dynamics);
    }
    return ep;
}

struct FrameScores {
    std::vector<double> mse;
    std::vector<double> ssim;

    double mean_mse() const { return mean(mse); }
    double mean_ssim() const { return mean(ssim); }

private:
    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return v.empty() ? 0.0 : s / double(v.size());
    }
};

/// Scores generated frames 1..T against ground truth.
inline FrameScores score_frames(const Clip& generated, const Episode& ep) {
    FrameScores s;
    for (std::size_t t = 0; t < generated.size(); ++t) {
        const Frame& gt = ep.frames[t + 1];
        s.mse.push_back(mse(generated[t], gt));
        s.ssim.push_back(ssim(generated[t], gt).mean);
    }
    return s;
}

struct Comparison {
    Episode episode;
    RolloutResult ar;
    RolloutResult swr;
    FrameScores ar_scores;
    FrameScores swr_scores;
};

/// Runs AR and SWR on the same episode. Each mode draws predictor noise from
/// its own stream of the same seed.
inline Comparison compare_modes(const WorldConfig& w, const DecodeConfig& d, int action_bins, std::uint64_t seed) {
    const ToyTokenizer tok(tokenizer_config(w));
    const VocabLayout layout = make_layout(tok.codebook_size(), std::uint32_t(action_bins));
    Comparison c;
    c.episode = make_episode(w, tok, layout, d.horizon, seed);
    const OracleWorldModel::Geometry geo{tok.context_tokens(), tok.dynamics_tokens(), std::size_t(w.action_dims)};
    OracleWorldModel model(c.episode.truth, d.corruption, tok.codebook_size(), geo, d.compounding);
    Rng ar_rng = derive_rng(seed, "rollout/ar");
    Rng swr_rng = derive_rng(seed, "rollout/swr");
    c.ar = decode_ar(model, tok, c.episode.frames[0], c.episode.actions, d.horizon, layout, ar_rng);
    c.swr = decode_swr(model, tok, c.episode.frames[0], c.episode.actions, d.horizon, d.window, layout, swr_rng);
    c.ar_scores = score_frames(c.ar.frames, c.episode);
    c.swr_scores = score_frames(c.swr.frames, c.episode);
    return c;
}

} // namespace wmtok
