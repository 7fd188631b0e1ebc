#pragma once

#include "common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace wmtok {

/// Per-dimension value ranges and bin count for action discretization.
struct ActionRangeTable {
    std::vector<double> min;
    std::vector<double> max;
    int bins = 256;
    double epsilon = 1e-6;

    std::size_t dims() const { return min.size(); }

    void validate() const {
        if (bins < 2)
            throw InvalidArgument("action codec: invalid bin count " + std::to_string(bins));
        if (!(epsilon > 0.0))
            throw InvalidArgument("action codec: epsilon must be positive");
        if (min.size() != max.size() || min.empty())
            throw InvalidArgument("action codec: min/max dimension mismatch");
        for (std::size_t d = 0; d < min.size(); ++d)
            if (!std::isfinite(min[d]) || !std::isfinite(max[d]) || min[d] > max[d])
                throw InvalidArgument("action codec: invalid range in dim " + std::to_string(d));
    }

    bool operator==(const ActionRangeTable&) const = default;
};

/// One token per action dimension.
struct ActionTokenBlock {
    std::vector<TokenId> ids;
    bool operator==(const ActionTokenBlock&) const = default;
};

/// Fits per-dimension ranges to the observed minimum and maximum.
inline ActionRangeTable fit_ranges(std::span<const std::vector<double>> samples, int bins,
                                   double epsilon = 1e-6) {
    if (samples.empty())
        throw InvalidArgument("action codec: no samples to fit");
    ActionRangeTable t;
    t.bins = bins;
    t.epsilon = epsilon;
    const std::size_t dims = samples.front().size();
    t.min.assign(dims, 0.0);
    t.max.assign(dims, 0.0);
    for (std::size_t d = 0; d < dims; ++d) {
        t.min[d] = samples.front()[d];
        t.max[d] = samples.front()[d];
    }
    for (const auto& a : samples) {
        if (a.size() != dims)
            throw InvalidArgument("action codec: ragged samples");
        for (std::size_t d = 0; d < dims; ++d) {
            if (!std::isfinite(a[d]))
                throw InvalidArgument("action codec: non-finite sample");
            t.min[d] = std::min(t.min[d], a[d]);
            t.max[d] = std::max(t.max[d], a[d]);
        }
    }
    t.validate();
    return t;
}

/// Bin index of a single value, clamped to [0, bins-1].
inline int action_bin(double value, std::size_t dim, const ActionRangeTable& t) {
    if (!std::isfinite(value))
        throw InvalidArgument("action codec: non-finite action value");
    const double span = t.max[dim] - t.min[dim] + t.epsilon;
    const double b = std::floor(t.bins * (value - t.min[dim]) / span);
    return static_cast<int>(std::clamp(b, 0.0, double(t.bins - 1)));
}

/// Discretizes an action vector; token = bin + offset.
inline ActionTokenBlock discretize(std::span<const double> action, const ActionRangeTable& t, TokenId offset) {
    t.validate();
    if (action.size() != t.dims())
        throw InvalidArgument("action codec: action has " + std::to_string(action.size()) +
                              " dims, table has " + std::to_string(t.dims()));
    ActionTokenBlock block;
    block.ids.reserve(action.size());
    for (std::size_t d = 0; d < action.size(); ++d)
        block.ids.push_back(offset + static_cast<TokenId>(action_bin(action[d], d, t)));
    return block;
}

/// Maps tokens back to bin centres.
inline std::vector<double> dequantize(const ActionTokenBlock& block, const ActionRangeTable& t, TokenId offset) {
    t.validate();
    if (block.ids.size() != t.dims())
        throw InvalidArgument("action codec: block/table dimension mismatch");
    std::vector<double> out(block.ids.size());
    for (std::size_t d = 0; d < out.size(); ++d) {
        if (block.ids[d] < offset || block.ids[d] >= offset + static_cast<TokenId>(t.bins))
            throw InvalidArgument("action codec: token " + std::to_string(block.ids[d]) + " is not an action token");
        const double width = (t.max[d] - t.min[d] + t.epsilon) / t.bins;
        out[d] = t.min[d] + (static_cast<double>(block.ids[d] - offset) + 0.5) * width;
    }
    return out;
}

inline nlohmann::json to_json(const ActionRangeTable& t) {
    return nlohmann::json{{"dims", t.dims()}, {"B_a", t.bins}, {"epsilon", t.epsilon}, {"min", t.min}, {"max", t.max}};
}

inline ActionRangeTable table_from_json(const nlohmann::json& j) {
    ActionRangeTable t;
    try {
        t.bins = j.at("B_a").get<int>();
        t.epsilon = j.at("epsilon").get<double>();
        t.min = j.at("min").get<std::vector<double>>();
        t.max = j.at("max").get<std::vector<double>>();
        if (j.at("dims").get<std::size_t>() != t.min.size())
            throw InvalidArgument("action codec: dims field does not match range arrays");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("action codec: malformed range table: ") + e.what());
    }
    t.validate();
    return t;
}

inline void save_table(const ActionRangeTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("action codec: cannot write " + path);
    out << to_json(t).dump(2) << '\n';
}

inline ActionRangeTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("action codec: cannot read " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("action codec: " + path + ": " + e.what());
    }
    return table_from_json(j);
}

} // namespace wmtok
