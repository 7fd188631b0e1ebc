#pragma once

#include "common.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace wmtok {

/// Row-major raster with 1 or 3 interleaved channels, values nominally in [0,1].
struct Frame {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;

    Frame() = default;
    Frame(int h, int w, int c = 1, double fill = 0.0) : height(h), width(w), channels(c) {
        if (h < 1 || w < 1 || (c != 1 && c != 3))
            throw InvalidArgument("frame: invalid shape " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                                  std::to_string(c));
        data.assign(std::size_t(h) * w * c, fill);
    }

    double& at(int r, int col, int ch = 0) { return data[(std::size_t(r) * width + col) * channels + ch]; }
    double at(int r, int col, int ch = 0) const { return data[(std::size_t(r) * width + col) * channels + ch]; }

    std::size_t pixels() const { return std::size_t(height) * width; }
    bool same_shape(const Frame& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    bool operator==(const Frame&) const = default;
};

using Clip = std::vector<Frame>;

inline void require_same_shape(const Frame& a, const Frame& b, const char* what) {
    if (!a.same_shape(b))
        throw InvalidArgument(std::string(what) + ": frame dimensions differ (" + std::to_string(a.height) + "x" +
                              std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                              std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                              std::to_string(b.channels) + ")");
}

/// Binary H x W mask.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int h, int w, bool fill = false) : height(h), width(w), bits(std::size_t(h) * w, fill ? 1 : 0) {}

    std::uint8_t& at(int r, int c) { return bits[std::size_t(r) * width + c]; }
    std::uint8_t at(int r, int c) const { return bits[std::size_t(r) * width + c]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits)
            n += b;
        return n;
    }

    bool operator==(const Mask&) const = default;
};

} // namespace wmtok
