#pragma once

#include "common.hpp"
#include "frame.hpp"
#include "fsq.hpp"
#include "seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

enum class Move { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

inline constexpr int kMoveCount = 5;

inline Move move_from_id(int id) {
    if (id < 0 || id >= kMoveCount)
        throw InvalidArgument("world: unknown action " + std::to_string(id));
    return static_cast<Move>(id);
}

/// Grid world with one square object. Positions are pixel coordinates of the
/// object's top-left corner; one move shifts it by `stride` pixels.
struct WorldState {
    int height = 32;
    int width = 32;
    int row = 0;
    int col = 0;
    int extent = 4;
    int stride = 1;
    double background = 0.0;

    void validate() const {
        if (height < 1 || width < 1)
            throw InvalidArgument("world: grid must be non-empty");
        if (extent < 0 || extent > height || extent > width)
            throw InvalidArgument("world: object extent does not fit the grid");
        if (stride < 1)
            throw InvalidArgument("world: stride must be >= 1");
        if (!(background >= 0.0 && background <= 1.0))
            throw InvalidArgument("world: background must lie in [0,1]");
        if (row < 0 || col < 0 || row + extent > height || col + extent > width)
            throw InvalidArgument("world: object outside grid");
    }

    bool operator==(const WorldState&) const = default;
};

inline WorldState step(const WorldState& s, Move m) {
    WorldState n = s;
    switch (m) {
    case Move::Up: n.row -= s.stride; break;
    case Move::Down: n.row += s.stride; break;
    case Move::Left: n.col -= s.stride; break;
    case Move::Right: n.col += s.stride; break;
    case Move::Stay: break;
    }
    n.row = std::clamp(n.row, 0, s.height - s.extent);
    n.col = std::clamp(n.col, 0, s.width - s.extent);
    return n;
}

inline WorldState step(const WorldState& s, int action_id) { return step(s, move_from_id(action_id)); }

inline Frame render(const WorldState& s) {
    s.validate();
    Frame f(s.height, s.width, 1, s.background);
    for (int r = s.row; r < s.row + s.extent; ++r)
        for (int c = s.col; c < s.col + s.extent; ++c)
            f.at(r, c) = 1.0;
    return f;
}

/// Toy tokenizer geometry. Context tokens quantize fine patch means, dynamics
/// tokens quantize coarse block means of the quantized fine values.
struct ToyTokenizerConfig {
    int height = 32;
    int width = 32;
    int ctx_patch = 4;
    int dyn_patch = 8;
    fsq::Levels levels = fsq::Levels({7, 5});

    void validate() const {
        if (ctx_patch < 1 || dyn_patch < 1)
            throw InvalidArgument("tokenizer: patch sizes must be positive");
        if (dyn_patch % ctx_patch != 0)
            throw InvalidArgument("tokenizer: dynamics patch must be a multiple of the context patch");
        if (height % dyn_patch != 0 || width % dyn_patch != 0)
            throw InvalidArgument("tokenizer: frame " + std::to_string(height) + "x" + std::to_string(width) +
                                  " not divisible by patch size " + std::to_string(dyn_patch));
        if (levels.dims() == 0)
            throw InvalidArgument("tokenizer: empty FSQ levels");
    }

    int context_tokens() const { return (height / ctx_patch) * (width / ctx_patch); }
    int dynamics_tokens() const { return (height / dyn_patch) * (width / dyn_patch); }
    std::uint32_t codebook_size() const { return levels.codebook_size(); }

    /// Intensity spacing between adjacent lattice values.
    double step() const { return 1.0 / (double(levels.codebook_size()) - 1.0); }
    double half_step() const { return 0.5 * step(); }
};

struct EncodedFrame {
    std::vector<std::uint32_t> context;
    std::vector<std::uint32_t> dynamics;
    bool operator==(const EncodedFrame&) const = default;
};

/// Scalar intensity <-> codebook index through successive FSQ digits.
///
/// Intensity m maps to the lattice level n* = m (K-1). Each dimension quantizes
/// the remaining residual at its place value, most significant first, so the
/// reconstructed level is within one half of n*.
class IntensityQuantizer {
public:
    explicit IntensityQuantizer(const fsq::Levels& levels) : levels_(levels) {
        const std::size_t d = levels.dims();
        place_.assign(d, 1.0);
        for (std::size_t i = d; i-- > 1;)
            place_[i - 1] = place_[i] * levels.level(i);
        for (std::size_t i = 0; i < d; ++i)
            single_.emplace_back(std::vector<int>{levels.level(i)});
        value_.resize(levels.codebook_size());
        for (std::uint32_t t = 0; t < levels.codebook_size(); ++t)
            value_[t] = level_of(t) / (double(levels.codebook_size()) - 1.0);
    }

    std::uint32_t encode(double intensity) const {
        const double top = double(levels_.codebook_size()) - 1.0;
        double residual = std::clamp(intensity, 0.0, 1.0) * top;
        fsq::Codeword code;
        code.digits.resize(levels_.dims());
        for (std::size_t i = 0; i < levels_.dims(); ++i) {
            const double r = place_[i];
            const double target = (residual - (r - 1.0) / 2.0) / r;
            const double latent = latent_for(target + levels_.digit_min(i), i);
            const int digit = fsq::quantize(std::span<const double>(&latent, 1), single_[i]).digits[0];
            code.digits[i] = digit;
            residual -= (digit - levels_.digit_min(i)) * r;
        }
        return fsq::encode_index(code, levels_).value;
    }

    double decode(std::uint32_t token) const {
        if (token >= value_.size())
            throw InvalidArgument("tokenizer: token " + std::to_string(token) + " >= K");
        return value_[token];
    }

private:
    double level_of(std::uint32_t token) const {
        const fsq::Codeword c = fsq::decode_index(fsq::CodeIndex{token}, levels_);
        double n = 0.0;
        for (std::size_t i = 0; i < c.digits.size(); ++i)
            n += (c.digits[i] - levels_.digit_min(i)) * place_[i];
        return n;
    }

    // Inverse of the bounding function, kept strictly inside the open interval.
    double latent_for(double u, std::size_t i) const {
        const double half = 0.5 * levels_.level(i);
        const double x = std::clamp((u + levels_.offset(i)) / half, -1.0 + 1e-12, 1.0 - 1e-12);
        return std::atanh(x) - levels_.shift(i);
    }

    fsq::Levels levels_;
    std::vector<double> place_;
    std::vector<fsq::Levels> single_;
    std::vector<double> value_;
};

class ToyTokenizer {
public:
    explicit ToyTokenizer(ToyTokenizerConfig cfg = {}) : cfg_(std::move(cfg)), quant_((cfg_.validate(), cfg_.levels)) {}

    const ToyTokenizerConfig& config() const { return cfg_; }
    std::size_t context_tokens() const { return std::size_t(cfg_.context_tokens()); }
    std::size_t dynamics_tokens() const { return std::size_t(cfg_.dynamics_tokens()); }
    std::uint32_t codebook_size() const { return cfg_.codebook_size(); }
    const IntensityQuantizer& quantizer() const { return quant_; }

    EncodedFrame encode(const Frame& f) const {
        if (f.height != cfg_.height || f.width != cfg_.width || f.channels != 1)
            throw InvalidArgument("tokenizer: frame is " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                                  "x" + std::to_string(f.channels) + ", expected " + std::to_string(cfg_.height) +
                                  "x" + std::to_string(cfg_.width) + "x1");
        const int p = cfg_.ctx_patch;
        const int gw = cfg_.width / p;
        EncodedFrame e;
        e.context.resize(context_tokens());
        for (int pr = 0; pr < cfg_.height / p; ++pr)
            for (int pc = 0; pc < gw; ++pc) {
                double sum = 0.0;
                for (int r = pr * p; r < (pr + 1) * p; ++r)
                    for (int c = pc * p; c < (pc + 1) * p; ++c)
                        sum += f.at(r, c);
                e.context[std::size_t(pr) * gw + pc] = quant_.encode(sum / (p * p));
            }
        e.dynamics.resize(dynamics_tokens());
        for (std::size_t b = 0; b < e.dynamics.size(); ++b)
            e.dynamics[b] = quant_.encode(block_mean(e.context, b));
        return e;
    }

    /// Blocks whose context detail agrees with the dynamics token keep that
    /// detail; all other blocks are filled with the dynamics value.
    Frame decode(std::span<const std::uint32_t> ctx, std::span<const std::uint32_t> dyn) const {
        if (ctx.size() != context_tokens() || dyn.size() != dynamics_tokens())
            throw InvalidArgument("tokenizer: token counts " + std::to_string(ctx.size()) + "/" +
                                  std::to_string(dyn.size()) + " do not match " + std::to_string(context_tokens()) +
                                  "/" + std::to_string(dynamics_tokens()));
        Frame f(cfg_.height, cfg_.width, 1);
        const int p = cfg_.ctx_patch, q = cfg_.dyn_patch;
        const int gw = cfg_.width / p, bw = cfg_.width / q, ratio = q / p;
        for (std::size_t b = 0; b < dyn.size(); ++b) {
            const int br = int(b) / bw, bc = int(b) % bw;
            const bool keep = quant_.encode(block_mean(ctx, b)) == dyn[b];
            const double flat = quant_.decode(dyn[b]);
            for (int i = 0; i < ratio; ++i)
                for (int j = 0; j < ratio; ++j) {
                    const int pr = br * ratio + i, pc = bc * ratio + j;
                    const double v = keep ? quant_.decode(ctx[std::size_t(pr) * gw + pc]) : flat;
                    for (int r = pr * p; r < (pr + 1) * p; ++r)
                        for (int c = pc * p; c < (pc + 1) * p; ++c)
                            f.at(r, c) = v;
                }
        }
        return f;
    }

private:
    double block_mean(std::span<const std::uint32_t> ctx, std::size_t block) const {
        const int p = cfg_.ctx_patch, q = cfg_.dyn_patch;
        const int gw = cfg_.width / p, bw = cfg_.width / q, ratio = q / p;
        const int br = int(block) / bw, bc = int(block) % bw;
        double sum = 0.0;
        for (int i = 0; i < ratio; ++i)
            for (int j = 0; j < ratio; ++j)
                sum += quant_.decode(ctx[std::size_t(br * ratio + i) * gw + bc * ratio + j]);
        return sum / (ratio * ratio);
    }

    ToyTokenizerConfig cfg_;
    IntensityQuantizer quant_;
};

inline EncodedFrame encode_frame(const Frame& f, const ToyTokenizerConfig& cfg) { return ToyTokenizer(cfg).encode(f); }

inline Frame decode_tokens(std::span<const std::uint32_t> ctx, std::span<const std::uint32_t> dyn,
                           const ToyTokenizerConfig& cfg) {
    return ToyTokenizer(cfg).decode(ctx, dyn);
}

/// Replaces each token, independently with probability p, by a uniform codebook index.
inline std::vector<std::uint32_t> oracle_predictor(std::span<const std::uint32_t> truth, double p,
                                                   std::uint32_t codebook, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidArgument("oracle: corruption probability " + std::to_string(p) + " outside [0,1]");
    if (codebook < 1)
        throw InvalidArgument("oracle: empty codebook");
    std::bernoulli_distribution flip(p);
    std::uniform_int_distribution<std::uint32_t> pick(0, codebook - 1);
    std::vector<std::uint32_t> out(truth.begin(), truth.end());
    for (auto& t : out)
        if (flip(rng))
            t = pick(rng);
    return out;
}

/// Stand-in world model that knows the ground-truth dynamics tokens and errs
/// more the more of its own output it is conditioned on: with g generated
/// blocks in the prompt each token is corrupted with probability
/// 1 - (1-p)^(g+1). Freshly encoded blocks do not count as generated.
class OracleWorldModel {
public:
    struct Geometry {
        std::size_t context_tokens = 0;
        std::size_t dynamics_tokens = 0;
        std::size_t action_dims = 0;
    };

    OracleWorldModel(std::vector<std::vector<std::uint32_t>> truth, double p, std::uint32_t codebook, Geometry g,
                     bool compounding = true)
        : truth_(std::move(truth)), p_(p), codebook_(codebook), geo_(g), compounding_(compounding) {
        if (!(p >= 0.0 && p <= 1.0))
            throw InvalidArgument("oracle: corruption probability outside [0,1]");
    }

    /// Number of generated dynamics blocks contained in a prompt.
    std::size_t generated_blocks(std::size_t prompt_len) const {
        const std::size_t seed = geo_.context_tokens + geo_.dynamics_tokens + geo_.action_dims;
        if (prompt_len < seed)
            throw InvalidArgument("oracle: prompt shorter than its seed block");
        return (prompt_len - seed) / (geo_.dynamics_tokens + geo_.action_dims);
    }

    double effective_probability(std::size_t prompt_len) const {
        if (!compounding_)
            return p_;
        return 1.0 - std::pow(1.0 - p_, double(generated_blocks(prompt_len) + 1));
    }

    /// `step` is the 1-based index of the frame being predicted.
    std::vector<std::uint32_t> predict(std::span<const TokenId> prompt, int step, Rng& rng) const {
        if (step < 1 || std::size_t(step) > truth_.size())
            throw InvalidArgument("oracle: no ground truth for step " + std::to_string(step));
        return oracle_predictor(truth_[std::size_t(step) - 1], effective_probability(prompt.size()), codebook_, rng);
    }

private:
    std::vector<std::vector<std::uint32_t>> truth_;
    double p_;
    std::uint32_t codebook_;
    Geometry geo_;
    bool compounding_;
};

} // namespace wmtok
