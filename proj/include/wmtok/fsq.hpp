#pragma once

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wmtok::fsq {

/// Per-dimension level counts together with the shift and offset used by the
/// bounding function.
///
/// Odd level counts use zero shift and offset. Even level counts use an offset
/// of one half and the matching shift atanh(2o/L), so that the rounded values
/// land on integer digits in [-floor(L/2), L-1-floor(L/2)].
class Levels {
public:
    Levels() = default;

    explicit Levels(std::vector<int> levels) : levels_(std::move(levels)) {
        if (levels_.empty())
            throw InvalidArgument("fsq: empty level list");
        std::uint64_t k = 1;
        for (int l : levels_) {
            if (l < 2)
                throw InvalidArgument("fsq: level count must be >= 2, got " + std::to_string(l));
            k *= static_cast<std::uint64_t>(l);
            if (k > std::numeric_limits<std::uint32_t>::max())
                throw InvalidArgument("fsq: codebook size overflows 32 bits");
        }
        codebook_size_ = static_cast<std::uint32_t>(k);
        shift_.resize(levels_.size());
        offset_.resize(levels_.size());
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            const double l = levels_[i];
            offset_[i] = (levels_[i] % 2 == 0) ? 0.5 : 0.0;
            shift_[i] = std::atanh(2.0 * offset_[i] / l);
        }
    }

    /// Parses a comma-separated list such as "7,5,5,5,5".
    static Levels parse(std::string_view text) {
        std::vector<int> out;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t comma = text.find(',', pos);
            if (comma == std::string_view::npos)
                comma = text.size();
            std::string item(text.substr(pos, comma - pos));
            std::size_t used = 0;
            int value = 0;
            try {
                value = std::stoi(item, &used);
            } catch (const std::exception&) {
                throw InvalidArgument("fsq: invalid level list '" + std::string(text) + "'");
            }
            if (used != item.size())
                throw InvalidArgument("fsq: invalid level list '" + std::string(text) + "'");
            out.push_back(value);
            pos = comma + 1;
        }
        return Levels(std::move(out));
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (i)
                s += ',';
            s += std::to_string(levels_[i]);
        }
        return s;
    }

    std::size_t dims() const { return levels_.size(); }
    int level(std::size_t i) const { return levels_[i]; }
    const std::vector<int>& levels() const { return levels_; }
    double shift(std::size_t i) const { return shift_[i]; }
    double offset(std::size_t i) const { return offset_[i]; }
    int digit_min(std::size_t i) const { return -(levels_[i] / 2); }
    int digit_max(std::size_t i) const { return levels_[i] - 1 - levels_[i] / 2; }

    /// Product of the level counts.
    std::uint32_t codebook_size() const { return codebook_size_; }

    bool operator==(const Levels& other) const { return levels_ == other.levels_; }

private:
    std::vector<int> levels_;
    std::vector<double> shift_;
    std::vector<double> offset_;
    std::uint32_t codebook_size_ = 0;
};

inline std::uint32_t codebook_size(const Levels& levels) { return levels.codebook_size(); }

/// Integer digit vector, one entry per latent dimension.
struct Codeword {
    std::vector<int> digits;
    bool operator==(const Codeword&) const = default;
};

/// Flat codebook index.
struct CodeIndex {
    std::uint32_t value = 0;
    auto operator<=>(const CodeIndex&) const = default;
};

/// Quantization output together with the pre-rounding residual.
struct Quantized {
    Codeword code;
    std::vector<double> residual;
};

inline void check_dims(std::size_t got, const Levels& levels) {
    if (got != levels.dims())
        throw InvalidArgument("fsq: latent has " + std::to_string(got) + " dims, levels have " +
                              std::to_string(levels.dims()));
}

/// Bounding function (L/2) tanh(z + s) - o, applied elementwise.
inline std::vector<double> bound(std::span<const double> z, const Levels& levels) {
    check_dims(z.size(), levels);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i]))
            throw InvalidArgument("fsq: non-finite latent value");
        out[i] = 0.5 * levels.level(i) * std::tanh(z[i] + levels.shift(i)) - levels.offset(i);
    }
    return out;
}

/// Bounds, rounds half away from zero, and clamps each dimension to its digit range.
inline Quantized quantize_with_residual(std::span<const double> z, const Levels& levels) {
    std::vector<double> b = bound(z, levels);
    Quantized q;
    q.code.digits.resize(b.size());
    q.residual.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        double r = std::round(b[i]);
        r = std::clamp(r, double(levels.digit_min(i)), double(levels.digit_max(i)));
        q.code.digits[i] = static_cast<int>(r);
        q.residual[i] = b[i] - r;
    }
    return q;
}

inline Codeword quantize(std::span<const double> z, const Levels& levels) {
    return quantize_with_residual(z, levels).code;
}

inline void check_codeword(const Codeword& c, const Levels& levels) {
    check_dims(c.digits.size(), levels);
    for (std::size_t i = 0; i < c.digits.size(); ++i)
        if (c.digits[i] < levels.digit_min(i) || c.digits[i] > levels.digit_max(i))
            throw InvalidArgument("fsq: digit " + std::to_string(c.digits[i]) + " out of range in dim " +
                                  std::to_string(i));
}

/// Mixed-radix index; dimension 0 is the least significant digit.
inline CodeIndex encode_index(const Codeword& c, const Levels& levels) {
    check_codeword(c, levels);
    std::uint64_t index = 0;
    std::uint64_t stride = 1;
    for (std::size_t i = 0; i < c.digits.size(); ++i) {
        index += static_cast<std::uint64_t>(c.digits[i] - levels.digit_min(i)) * stride;
        stride *= static_cast<std::uint64_t>(levels.level(i));
    }
    return CodeIndex{static_cast<std::uint32_t>(index)};
}

inline Codeword decode_index(CodeIndex index, const Levels& levels) {
    if (index.value >= levels.codebook_size())
        throw InvalidArgument("fsq: index " + std::to_string(index.value) + " out of range [0, " +
                              std::to_string(levels.codebook_size()) + ")");
    Codeword c;
    c.digits.resize(levels.dims());
    std::uint32_t rest = index.value;
    for (std::size_t i = 0; i < levels.dims(); ++i) {
        const auto l = static_cast<std::uint32_t>(levels.level(i));
        c.digits[i] = static_cast<int>(rest % l) + levels.digit_min(i);
        rest /= l;
    }
    return c;
}

/// Latent vector that quantizes exactly to the given codeword.
inline std::vector<double> embed(const Codeword& c, const Levels& levels) {
    check_codeword(c, levels);
    std::vector<double> z(c.digits.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double half = 0.5 * levels.level(i);
        z[i] = std::atanh((c.digits[i] + levels.offset(i)) / half) - levels.shift(i);
    }
    return z;
}

} // namespace wmtok::fsq
