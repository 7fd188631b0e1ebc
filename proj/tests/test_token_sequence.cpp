#include "wmtok/token_sequence.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace wmtok;

namespace {

const ClipSpec kFullSpec{8, 1, 1280, 80, 13};

SequenceParts random_parts(const ClipSpec& s, const VocabLayout& l, std::mt19937_64& rng) {
    std::uniform_int_distribution<TokenId> idx(0, l.codebook - 1), act(l.action_begin(), l.bos() - 1);
    SequenceParts p;
    for (int i = 0; i < s.context_tokens; ++i)
        p.context.push_back(idx(rng));
    for (int j = 0; j < s.dynamics_frames(); ++j) {
        p.dynamics.emplace_back();
        ActionTokenBlock a;
        for (int i = 0; i < s.dynamics_tokens; ++i)
            p.dynamics.back().push_back(idx(rng));
        for (int i = 0; i < s.action_dims; ++i)
            a.ids.push_back(act(rng));
        p.actions.push_back(a);
    }
    return p;
}

TokenSequence build(const SequenceParts& p, const VocabLayout& l, const ClipSpec& s) {
    return build_sequence(p.context, p.dynamics, p.actions, l, s);
}

} // namespace

TEST(Vocab, FullLayout) {
    const auto l = make_layout(4375, 256);
    EXPECT_EQ(l.vocab_size(), 9008u);
    EXPECT_EQ(l.bos(), 9006u);
    EXPECT_EQ(l.eos(), 9007u);
    EXPECT_EQ(make_layout(1, 2).vocab_size(), 6u);
    const auto small = make_layout(10, 4);
    EXPECT_EQ(small.action_begin(), 20u);
    EXPECT_EQ(small.bos(), 24u);
    EXPECT_THROW(make_layout(0, 4), InvalidArgument);
    EXPECT_THROW(make_layout(4, 1), InvalidArgument);
}

TEST(Vocab, Classify) {
    const auto l = make_layout(4375, 256);
    EXPECT_EQ(classify_token(4375, l), TokenKind::Context);
    EXPECT_EQ(classify_token(9006, l), TokenKind::Bos);
    EXPECT_EQ(classify_token(9007, l), TokenKind::Eos);
    EXPECT_EQ(classify_token(0, l), TokenKind::Dynamics);
    EXPECT_EQ(classify_token(8750, l), TokenKind::Action);
    EXPECT_THROW(classify_token(9008, l), InvalidArgument);
}

TEST(VocabProperty, SegmentsPartitionVocabulary) {
    const auto l = make_layout(13, 7);
    int counts[5] = {};
    for (TokenId id = 0; id < l.vocab_size(); ++id)
        ++counts[int(classify_token(id, l))];
    EXPECT_EQ(counts[0], 13);
    EXPECT_EQ(counts[1], 13);
    EXPECT_EQ(counts[2], 7);
    EXPECT_EQ(counts[3], 1);
    EXPECT_EQ(counts[4], 1);
}

TEST(Sequence, Lengths) {
    EXPECT_EQ(kFullSpec.sequence_length(), 1931u);
    EXPECT_EQ(kFullSpec.visual_tokens(), 1840u);
    const ClipSpec tiny{2, 1, 4, 2, 1};
    EXPECT_EQ(tiny.sequence_length(), std::size_t(4 + 1 * (2 + 1)));
    std::mt19937_64 rng(1);
    const auto l = make_layout(4375, 256);
    EXPECT_EQ(build(random_parts(kFullSpec, l, rng), l, kFullSpec).ids.size(), 1931u);
}

TEST(Sequence, ContextOffset) {
    const auto l = make_layout(10, 4);
    const ClipSpec s{2, 1, 1, 1, 1};
    std::vector<TokenId> ctx{0};
    std::vector<std::vector<TokenId>> dyn{{3}};
    std::vector<ActionTokenBlock> act{{{21}}};
    const auto seq = build_sequence(ctx, dyn, act, l, s);
    EXPECT_EQ(seq.ids, (std::vector<TokenId>{10, 3, 21}));
}

TEST(Sequence, ShapeErrors) {
    const auto l = make_layout(10, 4);
    const ClipSpec s{3, 1, 2, 1, 1};
    std::vector<TokenId> ctx{0, 1};
    std::vector<std::vector<TokenId>> dyn{{3}, {4}};
    std::vector<ActionTokenBlock> act{{{21}}, {{22}}};
    EXPECT_NO_THROW(build_sequence(ctx, dyn, act, l, s));
    std::vector<TokenId> short_ctx{0};
    EXPECT_THROW(build_sequence(short_ctx, dyn, act, l, s), InvalidArgument);
    std::vector<std::vector<TokenId>> bad_dyn{{3}, {10}};
    EXPECT_THROW(build_sequence(ctx, bad_dyn, act, l, s), InvalidArgument);
    std::vector<ActionTokenBlock> bad_act{{{21}}, {{5}}};
    EXPECT_THROW(build_sequence(ctx, dyn, bad_act, l, s), InvalidArgument);
    std::vector<ActionTokenBlock> one_act{{{21}}};
    EXPECT_THROW(build_sequence(ctx, dyn, one_act, l, s), InvalidArgument);
}

TEST(LossMask, Counts) {
    EXPECT_EQ(build_loss_mask(kFullSpec).count(), 480u);
    EXPECT_EQ(build_loss_mask(ClipSpec{2, 1, 4, 2, 1}).count(), 0u);
    EXPECT_EQ(build_loss_mask(ClipSpec{4, 1, 3, 2, 1}).count(), 4u);
}

TEST(LossMaskProperty, OnlyLaterDynamicsSupervised) {
    const auto mask = build_loss_mask(kFullSpec);
    const auto tags = segment_map(kFullSpec);
    ASSERT_EQ(mask.supervised.size(), tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i)
        EXPECT_EQ(mask.supervised[i], tags[i].kind == SegmentKind::Dynamics && tags[i].block >= 2);
}

TEST(SequenceProperty, InterleavingIsLossless) {
    std::mt19937_64 rng(9);
    for (const ClipSpec& s : {kFullSpec, ClipSpec{5, 2, 7, 3, 2}, ClipSpec{2, 1, 1, 1, 1}}) {
        const auto l = make_layout(35, 5);
        for (int trial = 0; trial < 20; ++trial) {
            const auto parts = random_parts(s, l, rng);
            const auto seq = build(parts, l, s);
            EXPECT_EQ(extract_parts(seq, l, s), parts);
        }
    }
}

TEST(SequenceProperty, ClassificationMatchesSegmentMap) {
    std::mt19937_64 rng(10);
    const auto l = make_layout(4375, 256);
    const auto seq = build(random_parts(kFullSpec, l, rng), l, kFullSpec);
    EXPECT_EQ(seq.segments, segment_map(kFullSpec));
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        const TokenKind k = classify_token(seq.ids[i], l);
        switch (seq.segments[i].kind) {
        case SegmentKind::Context: EXPECT_EQ(k, TokenKind::Context); break;
        case SegmentKind::Dynamics: EXPECT_EQ(k, TokenKind::Dynamics); break;
        case SegmentKind::Action: EXPECT_EQ(k, TokenKind::Action); break;
        }
    }
}

TEST(Sequence, BinaryRoundTrip) {
    std::mt19937_64 rng(2);
    const auto l = make_layout(4375, 256);
    const auto seq = build(random_parts(kFullSpec, l, rng), l, kFullSpec);
    const auto dir = std::filesystem::temp_directory_path() / "wmtok_seq_tests";
    std::filesystem::create_directories(dir);
    const std::string stem = (dir / "clip").string();
    write_sequence(seq, l, kFullSpec, stem);
    EXPECT_EQ(std::filesystem::file_size(stem + ".bin"), 1931u * 4u);
    const auto back = read_sequence(stem);
    EXPECT_EQ(back.sequence.ids, seq.ids);
    EXPECT_EQ(back.sequence.segments, seq.segments);
    EXPECT_EQ(back.layout, l);
    EXPECT_EQ(back.spec, kFullSpec);
    EXPECT_THROW(read_sequence((dir / "missing").string()), IoError);
}
