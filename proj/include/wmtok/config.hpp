#pragma once

#include "common.hpp"
#include "drift.hpp"
#include "fsq.hpp"
#include "reward.hpp"
#include "token_sequence.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wmtok {

/// Configuration error carrying the dotted path of the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct VocabConfig {
    std::string levels = "7,5,5,5,5";
    int action_bins = 256;
    bool operator==(const VocabConfig&) const = default;
};

struct DecodeConfig {
    std::string mode = "swr";
    int window = 6;
    int horizon = 30;
    double corruption = 0.02;
    bool compounding = true;
    bool operator==(const DecodeConfig&) const = default;
};

struct DriftConfig {
    double eps = 0.01;
    double delta_q = 0.05;
    double alpha = 0.6;
    int horizon = 1000;
    int trials = 100;
    std::vector<int> windows{1, 2, 4, 6, 8, 16};
    bool operator==(const DriftConfig&) const = default;
};

struct WorldConfig {
    int height = 32;
    int width = 32;
    int extent = 8;
    int stride = 8;
    double background = 0.0;
    int ctx_patch = 4;
    int dyn_patch = 8;
    std::string levels = "7,5";
    int action_dims = 1;
    bool operator==(const WorldConfig&) const = default;
};

struct PolicyConfig {
    int vocab = 5;
    int length = 8;
    int target = 0;
    int group_size = 16;
    int iterations = 200;
    double lr = 0.1;
    int updates_per_iteration = 1;
    double init_scale = 0.5;
    bool operator==(const PolicyConfig&) const = default;
};

struct RunConfig {
    ClipSpec clip;
    VocabConfig vocab;
    DecodeConfig decode;
    DriftConfig drift;
    RewardConfig reward;
    WorldConfig world;
    PolicyConfig policy;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw ConfigError(path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end())
            return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(field(key), "wrong type");
        }
    }

    const nlohmann::json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(field(it.key()), "unknown key");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok)
        throw ConfigError(path, what);
}

inline void check_levels(const std::string& text, const std::string& path) {
    try {
        (void)fsq::Levels::parse(text);
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
}

} // namespace detail

/// Checks every component invariant, reporting the first violation by field path.
inline void validate(const RunConfig& c) {
    using detail::require;
    require(c.clip.frames >= 2, "clip.T", "must be >= 2");
    require(c.clip.context_frames >= 1, "clip.t_c", "must be >= 1");
    require(c.clip.dynamics_frames() >= 1, "clip.t_c", "must be < T");
    require(c.clip.context_tokens >= 1, "clip.N_c", "must be >= 1");
    require(c.clip.dynamics_tokens >= 1, "clip.N_d", "must be >= 1");
    require(c.clip.action_dims >= 1, "clip.D_a", "must be >= 1");
    detail::check_levels(c.vocab.levels, "vocab.levels");
    require(c.vocab.action_bins >= 2, "vocab.B_a", "must be >= 2");
    require(c.decode.mode == "ar" || c.decode.mode == "swr", "decode.mode", "must be \"ar\" or \"swr\"");
    require(c.decode.window >= 1, "decode.W", "must be >= 1");
    require(c.decode.horizon >= 1, "decode.T", "must be >= 1");
    require(c.decode.corruption >= 0.0 && c.decode.corruption <= 1.0, "decode.corruption", "must lie in [0,1]");
    require(c.drift.eps >= 0.0, "drift.eps", "must be >= 0");
    require(c.drift.delta_q >= 0.0, "drift.delta_q", "must be >= 0");
    require(c.drift.alpha >= 0.0 && c.drift.alpha <= 1.0, "drift.alpha", "must lie in [0,1]");
    require(c.drift.horizon >= 1, "drift.T", "must be >= 1");
    require(c.drift.trials >= 1, "drift.trials", "must be >= 1");
    require(!c.drift.windows.empty(), "drift.windows", "must be non-empty");
    for (int w : c.drift.windows)
        require(w >= 1, "drift.windows", "entries must be >= 1");
    try {
        c.reward.validate();
    } catch (const Error& e) {
        throw ConfigError("reward", e.what());
    }
    require(c.world.height >= 1 && c.world.width >= 1, "world.height", "grid must be non-empty");
    require(c.world.extent >= 0 && c.world.extent <= std::min(c.world.height, c.world.width), "world.extent",
            "must fit the grid");
    require(c.world.stride >= 1, "world.stride", "must be >= 1");
    require(c.world.background >= 0.0 && c.world.background <= 1.0, "world.background", "must lie in [0,1]");
    require(c.world.ctx_patch >= 1, "world.ctx_patch", "must be >= 1");
    require(c.world.dyn_patch >= c.world.ctx_patch && c.world.dyn_patch % c.world.ctx_patch == 0, "world.dyn_patch",
            "must be a multiple of ctx_patch");
    require(c.world.height % c.world.dyn_patch == 0 && c.world.width % c.world.dyn_patch == 0, "world.dyn_patch",
            "must divide the grid");
    detail::check_levels(c.world.levels, "world.levels");
    require(c.world.action_dims >= 1, "world.action_dims", "must be >= 1");
    require(c.policy.vocab >= 1, "policy.vocab", "must be >= 1");
    require(c.policy.length >= 1, "policy.length", "must be >= 1");
    require(c.policy.target >= 0 && c.policy.target < c.policy.vocab, "policy.target", "must be a vocabulary token");
    require(c.policy.group_size >= 2, "policy.group_size", "must be >= 2");
    require(c.policy.iterations >= 0, "policy.iterations", "must be >= 0");
    require(c.policy.lr >= 0.0, "policy.lr", "must be >= 0");
    require(c.policy.updates_per_iteration >= 1, "policy.updates_per_iteration", "must be >= 1");
    require(c.policy.init_scale >= 0.0, "policy.init_scale", "must be >= 0");
    require(!c.output_dir.empty(), "output_dir", "must be non-empty");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::ObjectReader root(j, "");
    if (auto* s = root.child("clip")) {
        detail::ObjectReader r(*s, "clip");
        r.get("T", c.clip.frames);
        r.get("t_c", c.clip.context_frames);
        r.get("N_c", c.clip.context_tokens);
        r.get("N_d", c.clip.dynamics_tokens);
        r.get("D_a", c.clip.action_dims);
        r.finish();
    }
    if (auto* s = root.child("vocab")) {
        detail::ObjectReader r(*s, "vocab");
        r.get("levels", c.vocab.levels);
        r.get("B_a", c.vocab.action_bins);
        r.finish();
    }
    if (auto* s = root.child("decode")) {
        detail::ObjectReader r(*s, "decode");
        r.get("mode", c.decode.mode);
        r.get("W", c.decode.window);
        r.get("T", c.decode.horizon);
        r.get("corruption", c.decode.corruption);
        r.get("compounding", c.decode.compounding);
        r.finish();
    }
    if (auto* s = root.child("drift")) {
        detail::ObjectReader r(*s, "drift");
        r.get("eps", c.drift.eps);
        r.get("delta_q", c.drift.delta_q);
        r.get("alpha", c.drift.alpha);
        r.get("T", c.drift.horizon);
        r.get("trials", c.drift.trials);
        r.get("windows", c.drift.windows);
        r.finish();
    }
    if (auto* s = root.child("reward")) {
        detail::ObjectReader r(*s, "reward");
        r.get("weights", c.reward.weights);
        r.get("lambdas", c.reward.lambdas);
        r.get("huber_delta", c.reward.huber_delta);
        r.get("clip", c.reward.clip);
        r.get("beta", c.reward.beta);
        r.get("std_guard", c.reward.std_guard);
        r.finish();
    }
    if (auto* s = root.child("world")) {
        detail::ObjectReader r(*s, "world");
        r.get("height", c.world.height);
        r.get("width", c.world.width);
        r.get("extent", c.world.extent);
        r.get("stride", c.world.stride);
        r.get("background", c.world.background);
        r.get("ctx_patch", c.world.ctx_patch);
        r.get("dyn_patch", c.world.dyn_patch);
        r.get("levels", c.world.levels);
        r.get("action_dims", c.world.action_dims);
        r.finish();
    }
    if (auto* s = root.child("policy")) {
        detail::ObjectReader r(*s, "policy");
        r.get("vocab", c.policy.vocab);
        r.get("length", c.policy.length);
        r.get("target", c.policy.target);
        r.get("group_size", c.policy.group_size);
        r.get("iterations", c.policy.iterations);
        r.get("lr", c.policy.lr);
        r.get("updates_per_iteration", c.policy.updates_per_iteration);
        r.get("init_scale", c.policy.init_scale);
        r.finish();
    }
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    root.finish();
    validate(c);
    return c;
}

/// Parses JSON text; syntax errors report the 1-based line.
inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            line += text[i] == '\n';
        throw ConfigError("", "syntax error at line " + std::to_string(line) + ": " + e.what());
    }
    return config_from_json(j);
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["clip"] = {{"T", c.clip.frames},
                 {"t_c", c.clip.context_frames},
                 {"N_c", c.clip.context_tokens},
                 {"N_d", c.clip.dynamics_tokens},
                 {"D_a", c.clip.action_dims}};
    j["vocab"] = {{"levels", c.vocab.levels}, {"B_a", c.vocab.action_bins}};
    j["decode"] = {{"mode", c.decode.mode},
                   {"W", c.decode.window},
                   {"T", c.decode.horizon},
                   {"corruption", c.decode.corruption},
                   {"compounding", c.decode.compounding}};
    j["drift"] = {{"eps", c.drift.eps},         {"delta_q", c.drift.delta_q}, {"alpha", c.drift.alpha},
                  {"T", c.drift.horizon},       {"trials", c.drift.trials},   {"windows", c.drift.windows}};
    j["reward"] = {{"weights", c.reward.weights}, {"lambdas", c.reward.lambdas}, {"huber_delta", c.reward.huber_delta},
                   {"clip", c.reward.clip},       {"beta", c.reward.beta},       {"std_guard", c.reward.std_guard}};
    j["world"] = {{"height", c.world.height},       {"width", c.world.width},         {"extent", c.world.extent},
                  {"stride", c.world.stride},       {"background", c.world.background}, {"ctx_patch", c.world.ctx_patch},
                  {"dyn_patch", c.world.dyn_patch}, {"levels", c.world.levels},       {"action_dims", c.world.action_dims}};
    j["policy"] = {{"vocab", c.policy.vocab},
                   {"length", c.policy.length},
                   {"target", c.policy.target},
                   {"group_size", c.policy.group_size},
                   {"iterations", c.policy.iterations},
                   {"lr", c.policy.lr},
                   {"updates_per_iteration", c.policy.updates_per_iteration},
                   {"init_scale", c.policy.init_scale}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

/// Effective configuration as JSON text; parse_config(echo_config(c)) == c.
inline std::string echo_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("config: cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace wmtok
