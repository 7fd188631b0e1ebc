#pragma once

#include "action_codec.hpp"
#include "common.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace wmtok {

/// Segment offsets of the joint vocabulary:
/// dynamics [0,K), context [K,2K), action [2K,2K+B_a), then BOS and EOS.
struct VocabLayout {
    std::uint32_t codebook = 0;
    std::uint32_t action_bins = 0;

    TokenId dynamics_begin() const { return 0; }
    TokenId context_begin() const { return codebook; }
    TokenId action_begin() const { return 2 * codebook; }
    TokenId bos() const { return 2 * codebook + action_bins; }
    TokenId eos() const { return bos() + 1; }
    std::uint32_t vocab_size() const { return 2 * codebook + action_bins + 2; }

    bool operator==(const VocabLayout&) const = default;
};

inline VocabLayout make_layout(std::uint32_t k, std::uint32_t action_bins) {
    if (k < 1)
        throw InvalidArgument("vocab: K must be >= 1");
    if (action_bins < 2)
        throw InvalidArgument("vocab: B_a must be >= 2");
    return VocabLayout{k, action_bins};
}

enum class TokenKind { Dynamics, Context, Action, Bos, Eos };

inline const char* to_string(TokenKind k) {
    switch (k) {
    case TokenKind::Dynamics: return "dynamics";
    case TokenKind::Context: return "context";
    case TokenKind::Action: return "action";
    case TokenKind::Bos: return "bos";
    case TokenKind::Eos: return "eos";
    }
    return "?";
}

inline TokenKind classify_token(TokenId id, const VocabLayout& layout) {
    if (id >= layout.vocab_size())
        throw InvalidArgument("vocab: token " + std::to_string(id) + " >= V=" + std::to_string(layout.vocab_size()));
    if (id < layout.context_begin())
        return TokenKind::Dynamics;
    if (id < layout.action_begin())
        return TokenKind::Context;
    if (id < layout.bos())
        return TokenKind::Action;
    return id == layout.bos() ? TokenKind::Bos : TokenKind::Eos;
}

/// Clip geometry: T frames, t_c context frames, token counts per block.
struct ClipSpec {
    int frames = 8;
    int context_frames = 1;
    int context_tokens = 1280;
    int dynamics_tokens = 80;
    int action_dims = 13;

    int dynamics_frames() const { return frames - context_frames; }

    void validate() const {
        if (context_frames < 1 || dynamics_frames() < 1)
            throw InvalidArgument("clip spec: need t_c >= 1 and t_d >= 1");
        if (context_tokens < 1 || dynamics_tokens < 1 || action_dims < 1)
            throw InvalidArgument("clip spec: token counts must be positive");
    }

    /// S = N_c + t_d (N_d + D_a).
    std::size_t sequence_length() const {
        return std::size_t(context_tokens) + std::size_t(dynamics_frames()) * (dynamics_tokens + action_dims);
    }

    /// N_c + t_d N_d.
    std::size_t visual_tokens() const {
        return std::size_t(context_tokens) + std::size_t(dynamics_frames()) * dynamics_tokens;
    }

    /// (t_d - 1) N_d.
    std::size_t supervised_count() const { return std::size_t(dynamics_frames() - 1) * dynamics_tokens; }

    bool operator==(const ClipSpec&) const = default;
};

enum class SegmentKind { Context, Dynamics, Action };

/// Kind of a sequence position plus the 1-based frame or step it belongs to
/// (0 for the context block).
struct SegmentTag {
    SegmentKind kind = SegmentKind::Context;
    int block = 0;
    bool operator==(const SegmentTag&) const = default;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    std::vector<SegmentTag> segments;
};

struct LossMask {
    std::vector<bool> supervised;

    std::size_t count() const {
        std::size_t n = 0;
        for (bool b : supervised)
            n += b;
        return n;
    }
};

/// Raw pieces of a sequence: indices in [0,K) plus offset action blocks.
struct SequenceParts {
    std::vector<TokenId> context;
    std::vector<std::vector<TokenId>> dynamics;
    std::vector<ActionTokenBlock> actions;
    bool operator==(const SequenceParts&) const = default;
};

/// Interleaves [ctx | dyn_1 a_1 | ... | dyn_td a_td]. Context indices are shifted
/// by K, dynamics indices stored raw, action ids taken as already offset. The last
/// action block carries the action of the final transition.
inline TokenSequence build_sequence(std::span<const TokenId> ctx, std::span<const std::vector<TokenId>> dyn,
                                    std::span<const ActionTokenBlock> actions, const VocabLayout& layout,
                                    const ClipSpec& spec) {
    spec.validate();
    const auto td = static_cast<std::size_t>(spec.dynamics_frames());
    if (ctx.size() != std::size_t(spec.context_tokens))
        throw InvalidArgument("sequence: context has " + std::to_string(ctx.size()) + " tokens, expected " +
                              std::to_string(spec.context_tokens));
    if (dyn.size() != td || actions.size() != td)
        throw InvalidArgument("sequence: expected " + std::to_string(td) + " dynamics and action blocks");

    TokenSequence seq;
    seq.ids.reserve(spec.sequence_length());
    seq.segments.reserve(spec.sequence_length());
    for (TokenId t : ctx) {
        if (t >= layout.codebook)
            throw InvalidArgument("sequence: context index " + std::to_string(t) + " >= K");
        seq.ids.push_back(t + layout.context_begin());
        seq.segments.push_back({SegmentKind::Context, 0});
    }
    for (std::size_t j = 0; j < td; ++j) {
        if (dyn[j].size() != std::size_t(spec.dynamics_tokens))
            throw InvalidArgument("sequence: dynamics block " + std::to_string(j + 1) + " has wrong length");
        if (actions[j].ids.size() != std::size_t(spec.action_dims))
            throw InvalidArgument("sequence: action block " + std::to_string(j + 1) + " has wrong length");
        const int block = static_cast<int>(j) + 1;
        for (TokenId t : dyn[j]) {
            if (t >= layout.codebook)
                throw InvalidArgument("sequence: dynamics index " + std::to_string(t) + " >= K");
            seq.ids.push_back(t);
            seq.segments.push_back({SegmentKind::Dynamics, block});
        }
        for (TokenId t : actions[j].ids) {
            if (t < layout.action_begin() || t >= layout.bos())
                throw InvalidArgument("sequence: token " + std::to_string(t) + " is not an action token");
            seq.ids.push_back(t);
            seq.segments.push_back({SegmentKind::Action, block});
        }
    }
    return seq;
}

/// Inverse of build_sequence.
inline SequenceParts extract_parts(const TokenSequence& seq, const VocabLayout& layout, const ClipSpec& spec) {
    spec.validate();
    if (seq.ids.size() != spec.sequence_length() || seq.segments.size() != seq.ids.size())
        throw InvalidArgument("sequence: length does not match clip spec");
    SequenceParts parts;
    parts.dynamics.resize(spec.dynamics_frames());
    parts.actions.resize(spec.dynamics_frames());
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        const SegmentTag& tag = seq.segments[i];
        switch (tag.kind) {
        case SegmentKind::Context: parts.context.push_back(seq.ids[i] - layout.context_begin()); break;
        case SegmentKind::Dynamics: parts.dynamics.at(tag.block - 1).push_back(seq.ids[i]); break;
        case SegmentKind::Action: parts.actions.at(tag.block - 1).ids.push_back(seq.ids[i]); break;
        }
    }
    return parts;
}

/// Supervises the dynamics positions of frames 2..t_d only.
inline LossMask build_loss_mask(const ClipSpec& spec) {
    spec.validate();
    LossMask mask;
    mask.supervised.reserve(spec.sequence_length());
    mask.supervised.insert(mask.supervised.end(), spec.context_tokens, false);
    for (int j = 1; j <= spec.dynamics_frames(); ++j) {
        mask.supervised.insert(mask.supervised.end(), spec.dynamics_tokens, j >= 2);
        mask.supervised.insert(mask.supervised.end(), spec.action_dims, false);
    }
    return mask;
}

/// Rebuilds the segment map for a sequence of ids with the given spec.
inline std::vector<SegmentTag> segment_map(const ClipSpec& spec) {
    spec.validate();
    std::vector<SegmentTag> tags;
    tags.reserve(spec.sequence_length());
    tags.insert(tags.end(), spec.context_tokens, SegmentTag{SegmentKind::Context, 0});
    for (int j = 1; j <= spec.dynamics_frames(); ++j) {
        tags.insert(tags.end(), spec.dynamics_tokens, SegmentTag{SegmentKind::Dynamics, j});
        tags.insert(tags.end(), spec.action_dims, SegmentTag{SegmentKind::Action, j});
    }
    return tags;
}

inline nlohmann::json to_json(const ClipSpec& s) {
    return nlohmann::json{{"T", s.frames},         {"t_c", s.context_frames}, {"N_c", s.context_tokens},
                          {"N_d", s.dynamics_tokens}, {"D_a", s.action_dims}};
}

inline nlohmann::json to_json(const VocabLayout& l) {
    return nlohmann::json{{"K", l.codebook}, {"B_a", l.action_bins}, {"V", l.vocab_size()}};
}

/// Writes `<stem>.bin` (little-endian u32 ids) and `<stem>.json` (spec and layout).
inline void write_sequence(const TokenSequence& seq, const VocabLayout& layout, const ClipSpec& spec,
                           const std::string& stem) {
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin)
        throw IoError("sequence: cannot write " + stem + ".bin");
    for (TokenId id : seq.ids) {
        const unsigned char b[4] = {static_cast<unsigned char>(id & 0xff), static_cast<unsigned char>((id >> 8) & 0xff),
                                    static_cast<unsigned char>((id >> 16) & 0xff),
                                    static_cast<unsigned char>((id >> 24) & 0xff)};
        bin.write(reinterpret_cast<const char*>(b), 4);
    }
    std::ofstream side(stem + ".json");
    if (!side)
        throw IoError("sequence: cannot write " + stem + ".json");
    side << nlohmann::json{{"length", seq.ids.size()}, {"spec", to_json(spec)}, {"layout", to_json(layout)}}.dump(2)
         << '\n';
}

struct StoredSequence {
    TokenSequence sequence;
    VocabLayout layout;
    ClipSpec spec;
};

inline StoredSequence read_sequence(const std::string& stem) {
    std::ifstream side(stem + ".json");
    if (!side)
        throw IoError("sequence: cannot read " + stem + ".json");
    StoredSequence out;
    std::size_t length = 0;
    try {
        const auto j = nlohmann::json::parse(side);
        length = j.at("length").get<std::size_t>();
        const auto& s = j.at("spec");
        out.spec = ClipSpec{s.at("T").get<int>(), s.at("t_c").get<int>(), s.at("N_c").get<int>(),
                            s.at("N_d").get<int>(), s.at("D_a").get<int>()};
        const auto& l = j.at("layout");
        out.layout = make_layout(l.at("K").get<std::uint32_t>(), l.at("B_a").get<std::uint32_t>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("sequence: malformed sidecar " + stem + ".json: " + e.what());
    }
    if (length != out.spec.sequence_length())
        throw IoError("sequence: sidecar length disagrees with spec");
    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!bin)
        throw IoError("sequence: cannot read " + stem + ".bin");
    out.sequence.ids.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
        unsigned char b[4];
        if (!bin.read(reinterpret_cast<char*>(b), 4))
            throw IoError("sequence: truncated " + stem + ".bin");
        out.sequence.ids[i] = TokenId(b[0]) | TokenId(b[1]) << 8 | TokenId(b[2]) << 16 | TokenId(b[3]) << 24;
    }
    out.sequence.segments = segment_map(out.spec);
    return out;
}

} // namespace wmtok
