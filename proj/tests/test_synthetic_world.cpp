#include "wmtok/synthetic_world.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wmtok;

namespace {

WorldState at(int r, int c) {
    WorldState s;
    s.row = r;
    s.col = c;
    return s;
}

// Frame whose ctx_patch x ctx_patch patches are constant with random intensities.
Frame patch_constant(std::mt19937_64& rng, int patch, bool lattice) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> n(0, 34);
    Frame f(32, 32);
    for (int pr = 0; pr < 32 / patch; ++pr)
        for (int pc = 0; pc < 32 / patch; ++pc) {
            const double v = lattice ? n(rng) / 34.0 : u(rng);
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c)
                    f.at(pr * patch + r, pc * patch + c) = v;
        }
    return f;
}

Frame noise_frame(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Frame f(32, 32);
    for (auto& v : f.data)
        v = u(rng);
    return f;
}

double max_abs_diff(const Frame& a, const Frame& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace

TEST(World, StepExamples) {
    WorldState s = at(0, 0);
    EXPECT_EQ(step(s, Move::Up), s);
    const WorldState moved = step(at(3, 3), Move::Right);
    EXPECT_EQ(moved.row, 3);
    EXPECT_EQ(moved.col, 4);
    EXPECT_EQ(step(at(5, 7), Move::Stay), at(5, 7));
    EXPECT_THROW(step(s, 5), InvalidArgument);
    EXPECT_THROW(step(s, -1), InvalidArgument);
}

TEST(WorldProperty, ReversibleAwayFromBorders) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pos(0, 28);
    for (int trial = 0; trial < 500; ++trial) {
        const WorldState s = at(pos(rng), pos(rng));
        if (s.col >= 1 && s.col + s.extent + 1 <= s.width) {
            EXPECT_EQ(step(step(s, Move::Left), Move::Right), s);
        }
        if (s.row >= 1 && s.row + s.extent + 1 <= s.height) {
            EXPECT_EQ(step(step(s, Move::Up), Move::Down), s);
        }
    }
}

TEST(WorldProperty, ObjectStaysInside) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> mv(0, 4);
    WorldState s = at(10, 10);
    s.stride = 5;
    for (int i = 0; i < 1000; ++i) {
        s = step(s, mv(rng));
        ASSERT_NO_THROW(s.validate());
    }
}

TEST(World, Render) {
    WorldState empty = at(0, 0);
    empty.extent = 0;
    empty.background = 0.3;
    const Frame e = render(empty);
    for (double v : e.data)
        EXPECT_EQ(v, 0.3);
    const WorldState c = at(14, 14);
    EXPECT_EQ(render(c), render(c));
    const Frame f = render(c);
    int ones = 0;
    for (double v : f.data)
        ones += v == 1.0;
    EXPECT_EQ(ones, c.extent * c.extent);
}

TEST(Tokenizer, DefaultGeometry) {
    ToyTokenizerConfig cfg;
    EXPECT_EQ(cfg.context_tokens(), 64);
    EXPECT_EQ(cfg.dynamics_tokens(), 16);
    EXPECT_EQ(cfg.codebook_size(), 35u);
    ToyTokenizerConfig full;
    full.height = 256;
    full.width = 320;
    full.ctx_patch = 8;
    full.dyn_patch = 32;
    EXPECT_EQ(full.context_tokens(), 1280);
    EXPECT_EQ(full.dynamics_tokens(), 80);
    ToyTokenizerConfig bad;
    bad.height = 30;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Tokenizer, IntensityLatticeRoundTrip) {
    const IntensityQuantizer q(fsq::Levels({7, 5}));
    for (std::uint32_t n = 0; n < 35; ++n) {
        const std::uint32_t t = q.encode(n / 34.0);
        EXPECT_NEAR(q.decode(t), n / 34.0, 1e-15);
    }
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double m = u(rng);
        EXPECT_LE(std::abs(q.decode(q.encode(m)) - m), 0.5 / 34.0 + 1e-12);
    }
}

TEST(Tokenizer, IntensityLatticeRoundTripEvenLevels) {
    const IntensityQuantizer q(fsq::Levels({4, 6, 3}));
    for (std::uint32_t n = 0; n < 72; ++n)
        EXPECT_NEAR(q.decode(q.encode(n / 71.0)), n / 71.0, 1e-15);
}

TEST(Tokenizer, UniformZeroFrame) {
    const ToyTokenizerConfig cfg;
    const auto e = encode_frame(Frame(32, 32), cfg);
    const fsq::Codeword zero{{cfg.levels.digit_min(0), cfg.levels.digit_min(1)}};
    const std::uint32_t expected = fsq::encode_index(zero, cfg.levels).value;
    for (auto t : e.context)
        EXPECT_EQ(t, expected);
    for (auto t : e.dynamics)
        EXPECT_EQ(t, expected);
}

TEST(Tokenizer, UniformFramesAreRepresentable) {
    const ToyTokenizerConfig cfg;
    for (int n = 0; n <= 34; ++n) {
        const Frame f(32, 32, 1, n / 34.0);
        const auto e = encode_frame(f, cfg);
        EXPECT_LE(max_abs_diff(decode_tokens(e.context, e.dynamics, cfg), f), 1e-15);
    }
}

TEST(Tokenizer, AllMaxTokensGiveBrightFrame) {
    const ToyTokenizerConfig cfg;
    const std::vector<std::uint32_t> ctx(64, 34), dyn(16, 34);
    const Frame f = decode_tokens(ctx, dyn, cfg);
    for (double v : f.data)
        EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Tokenizer, CountAndShapeErrors) {
    const ToyTokenizerConfig cfg;
    const std::vector<std::uint32_t> ctx(63, 0), dyn(16, 0);
    EXPECT_THROW(decode_tokens(ctx, dyn, cfg), InvalidArgument);
    EXPECT_THROW(encode_frame(Frame(16, 32), cfg), InvalidArgument);
}

TEST(TokenizerProperty, EncodeDecodeEncodeIsIdempotent) {
    const ToyTokenizer tok;
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const Frame x = i % 2 ? noise_frame(rng) : patch_constant(rng, 4, false);
        const auto e = tok.encode(x);
        EXPECT_EQ(tok.encode(tok.decode(e.context, e.dynamics)), e);
    }
}

TEST(TokenizerProperty, SubHalfStepPerturbationKeepsTokens) {
    const ToyTokenizer tok;
    const double half = tok.config().half_step();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> pix(0, 15);
    for (int i = 0; i < 100; ++i) {
        const Frame x = patch_constant(rng, 4, true);
        Frame y = x;
        const int r = pix(rng) * 2, c = pix(rng) * 2;
        // A single pixel moves the patch mean by delta / 16; keep it under half a step.
        const double delta = 0.99 * half * 16 * u(rng);
        y.at(r, c) = std::clamp(y.at(r, c) + delta, 0.0, 1.0);
        EXPECT_EQ(tok.encode(x), tok.encode(y));
    }
}

TEST(TokenizerProperty, RoundTripWithinHalfStepOnPatchConstantFrames) {
    const ToyTokenizer tok;
    const double half = tok.config().half_step();
    std::mt19937_64 rng(14);
    for (int i = 0; i < 100; ++i) {
        const Frame x = patch_constant(rng, 4, false);
        const auto e = tok.encode(x);
        EXPECT_LE(max_abs_diff(tok.decode(e.context, e.dynamics), x), half + 1e-12);
    }
}

TEST(TokenizerProperty, RoundTripErrorZeroIffPatchConstantOnLattice) {
    const ToyTokenizer tok;
    std::mt19937_64 rng(15);
    for (int i = 0; i < 50; ++i) {
        const Frame x = patch_constant(rng, 4, true);
        const auto e = tok.encode(x);
        EXPECT_LE(max_abs_diff(tok.decode(e.context, e.dynamics), x), 1e-15);
        const Frame n = noise_frame(rng);
        const auto en = tok.encode(n);
        EXPECT_GT(max_abs_diff(tok.decode(en.context, en.dynamics), n), 0.0);
    }
    for (int r = 0; r < 29; r += 3)
        for (int c = 0; c < 29; c += 5) {
            const Frame f = render(at(r, c));
            const auto e = tok.encode(f);
            const double err = max_abs_diff(tok.decode(e.context, e.dynamics), f);
            if (r % 4 == 0 && c % 4 == 0) {
                EXPECT_EQ(err, 0.0);
            }
            else
                EXPECT_GT(err, 0.0);
        }
}

TEST(Oracle, ZeroAndFullCorruption) {
    std::vector<std::uint32_t> truth(1000);
    for (std::size_t i = 0; i < truth.size(); ++i)
        truth[i] = std::uint32_t(i % 35);
    Rng rng(1);
    EXPECT_EQ(oracle_predictor(truth, 0.0, 35, rng), truth);
    std::vector<int> hist(35, 0);
    const std::vector<std::uint32_t> zeros(35000, 0);
    for (auto t : oracle_predictor(zeros, 1.0, 35, rng)) {
        ASSERT_LT(t, 35u);
        ++hist[t];
    }
    // Chi-square against uniform, 34 dof; 99.99th percentile is about 72.
    double chi = 0.0;
    for (int h : hist)
        chi += (h - 1000.0) * (h - 1000.0) / 1000.0;
    EXPECT_LT(chi, 72.0);
    EXPECT_THROW(oracle_predictor(truth, 1.5, 35, rng), InvalidArgument);
    EXPECT_THROW(oracle_predictor(truth, -0.1, 35, rng), InvalidArgument);
}

TEST(Oracle, CorruptedFractionWithinThreeSigma) {
    const double p = 0.1;
    const std::vector<std::uint32_t> truth(10000, 0);
    Rng rng(99);
    // Replacement by the same index is invisible; the visible rate is p (K-1)/K.
    const double q = p * 34.0 / 35.0;
    const auto out = oracle_predictor(truth, p, 35, rng);
    int changed = 0;
    for (auto t : out)
        changed += t != 0;
    EXPECT_LE(std::abs(changed - 10000 * q), 3 * std::sqrt(10000 * q * (1 - q)));
}

TEST(Oracle, DeterministicGivenSeed) {
    const std::vector<std::uint32_t> truth(500, 3);
    Rng a(5), b(5);
    EXPECT_EQ(oracle_predictor(truth, 0.3, 35, a), oracle_predictor(truth, 0.3, 35, b));
}

TEST(Oracle, WorldModelExposure) {
    OracleWorldModel m({{1, 2}}, 0.1, 35, {4, 2, 1});
    EXPECT_EQ(m.generated_blocks(7), 0u);
    EXPECT_EQ(m.generated_blocks(10), 1u);
    EXPECT_DOUBLE_EQ(m.effective_probability(7), 0.1);
    EXPECT_DOUBLE_EQ(m.effective_probability(13), 1.0 - std::pow(0.9, 3));
    OracleWorldModel flat({{1, 2}}, 0.1, 35, {4, 2, 1}, false);
    EXPECT_DOUBLE_EQ(flat.effective_probability(13), 0.1);
    Rng rng(0);
    std::vector<TokenId> prompt(7, 0);
    EXPECT_THROW(m.predict(prompt, 2, rng), InvalidArgument);
}
