#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace wmtok {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named substream of a master seed.
struct SeedStream {
    std::uint64_t master = 0;
    std::string label;
    Rng rng;
};

inline std::uint64_t mix_seed(std::uint64_t master, std::string_view label) {
    return splitmix64(splitmix64(master) ^ fnv1a(label));
}

inline SeedStream derive_stream(std::uint64_t master, std::string_view label) {
    return SeedStream{master, std::string(label), Rng(mix_seed(master, label))};
}

inline Rng derive_rng(std::uint64_t master, std::string_view label) { return Rng(mix_seed(master, label)); }

} // namespace wmtok
