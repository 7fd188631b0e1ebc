// wmtok: command-line front end for the tokenizer, rollout, drift, GRPO and metrics experiments.
//
// Exit codes: 0 success, 1 check failure, 2 usage or configuration error.

#include "wmtok/wmtok.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wmtok;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;

/// A check failed; reported on stderr with exit code 1.
struct CheckFailure : Error {
    using Error::Error;
};

/// Flags that override fields of a config file when given on the command line.
class Overrides {
public:
    explicit Overrides(RunConfig& flags) : flags_(flags) {}

    template <class Get>
    CLI::Option* add(CLI::App* app, const std::string& name, Get get, const std::string& desc) {
        CLI::Option* o = app->add_option(name, get(flags_), desc)->capture_default_str();
        entries_.push_back({o, [get](RunConfig& dst, RunConfig& src) { get(dst) = get(src); }});
        return o;
    }

    void apply(RunConfig& dst) const {
        for (const auto& e : entries_)
            if (e.option->count() > 0)
                e.copy(dst, flags_);
    }

private:
    struct Entry {
        CLI::Option* option;
        std::function<void(RunConfig&, RunConfig&)> copy;
    };
    RunConfig& flags_;
    std::vector<Entry> entries_;
};

struct Common {
    std::string config_path;
    RunConfig flags;
    Overrides overrides{flags};

    void add(CLI::App* app) {
        app->add_option("--config,-c", config_path, "JSON run configuration");
        overrides.add(app, "--seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }, "Master seed");
        overrides.add(app, "--out,-o", [](RunConfig& c) -> std::string& { return c.output_dir; }, "Output directory");
    }

    RunConfig resolve() const {
        RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
        overrides.apply(c);
        validate(c);
        return c;
    }
};

class Timings {
public:
    void add(const std::string& event, double seconds) { rows_.emplace_back(event, seconds); }

    void write(const fs::path& path, std::uint64_t seed) const {
        CsvWriter w(path, {"event", "seconds"}, seed);
        for (const auto& [e, s] : rows_)
            w.row({e, format_double(s)});
    }

private:
    std::vector<std::pair<std::string, double>> rows_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path prepare_output(const RunConfig& c) {
    const fs::path out(c.output_dir);
    fs::create_directories(out);
    std::ofstream(out / "effective_config.json") << echo_config(c);
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// fsq-selftest

int cmd_fsq_selftest(const std::string& levels_text, const std::string& out_dir) {
    const fsq::Levels levels = fsq::Levels::parse(levels_text);
    const std::uint32_t k = levels.codebook_size();
    if (k > 1000000u)
        throw InvalidArgument("fsq-selftest: codebook size " + std::to_string(k) + " exceeds 10^6");
    std::int64_t first_failure = -1;
    std::uint32_t passed = 0;
    for (std::uint32_t i = 0; i < k; ++i) {
        const fsq::Codeword c = fsq::decode_index(fsq::CodeIndex{i}, levels);
        const bool index_ok = fsq::encode_index(c, levels).value == i;
        const bool code_ok = fsq::quantize(fsq::embed(c, levels), levels) == c;
        if (index_ok && code_ok)
            ++passed;
        else if (first_failure < 0)
            first_failure = i;
    }
    fs::create_directories(out_dir);
    CsvWriter w(fs::path(out_dir) / "codebook_stats.csv",
                {"dim", "level", "digit_min", "digit_max", "offset", "shift", "radix"});
    std::uint64_t radix = 1;
    for (std::size_t d = 0; d < levels.dims(); ++d) {
        w.row({std::to_string(d), std::to_string(levels.level(d)), std::to_string(levels.digit_min(d)),
               std::to_string(levels.digit_max(d)), format_double(levels.offset(d)), format_double(levels.shift(d)),
               std::to_string(radix)});
        radix *= std::uint64_t(levels.level(d));
    }
    std::cout << "levels=" << levels.to_string() << " K=" << k << " round-trips " << passed << "/" << k
              << (passed == k ? " pass" : " FAIL") << "\n";
    if (first_failure >= 0)
        throw CheckFailure("fsq-selftest: round-trip failure at index " + std::to_string(first_failure));
    return kExitOk;
}

// rollout

void write_trace(const fs::path& path, const RolloutTrace& trace, std::uint64_t seed) {
    CsvWriter w(path, {"step", "prompt_len", "reencoded"}, seed);
    for (const auto& s : trace.steps)
        w.row({std::to_string(s.step), std::to_string(s.prompt_len), s.reencoded ? "1" : "0"});
}

int cmd_rollout(RunConfig c, bool full_scale) {
    if (full_scale) {
        c.world = full_scale_world();
        c.vocab.levels = c.world.levels;
        validate(c);
    }
    const fs::path out = prepare_output(c);
    Timings timings;
    const auto t0 = std::chrono::steady_clock::now();
    const Comparison cmp = compare_modes(c.world, c.decode, c.vocab.action_bins, c.seed);
    timings.add("compare_modes", seconds_since(t0));
    for (const auto& e : cmp.ar.trace.reencodes)
        timings.add("ar_reencode_after_step_" + std::to_string(e.after_step), e.wall_seconds);
    for (const auto& e : cmp.swr.trace.reencodes)
        timings.add("swr_reencode_after_step_" + std::to_string(e.after_step), e.wall_seconds);

    write_frames(cmp.episode.frames, out / "frames" / "truth");
    write_frames(cmp.ar.frames, out / "frames" / "ar");
    write_frames(cmp.swr.frames, out / "frames" / "swr");
    write_trace(out / "trace_ar.csv", cmp.ar.trace, c.seed);
    write_trace(out / "trace_swr.csv", cmp.swr.trace, c.seed);
    {
        CsvWriter w(out / "comparison.csv", {"frame_index", "ar_mse", "ar_ssim", "swr_mse", "swr_ssim"}, c.seed);
        for (std::size_t t = 0; t < cmp.ar_scores.mse.size(); ++t)
            w.row({std::to_string(t + 1), format_double(cmp.ar_scores.mse[t]), format_double(cmp.ar_scores.ssim[t]),
                   format_double(cmp.swr_scores.mse[t]), format_double(cmp.swr_scores.ssim[t])});
        w.row({"mean", format_double(cmp.ar_scores.mean_mse()), format_double(cmp.ar_scores.mean_ssim()),
               format_double(cmp.swr_scores.mean_mse()), format_double(cmp.swr_scores.mean_ssim())});
    }
    timings.write(out / "timings.csv", c.seed);
    std::cout << "T=" << c.decode.horizon << " W=" << c.decode.window << " max_prompt ar=" << cmp.ar.trace.max_prompt()
              << " swr=" << cmp.swr.trace.max_prompt() << " reencodings ar=" << cmp.ar.trace.reencode_count()
              << " swr=" << cmp.swr.trace.reencode_count() << " mean_mse ar=" << fmt("%.6g", cmp.ar_scores.mean_mse())
              << " swr=" << fmt("%.6g", cmp.swr_scores.mean_mse()) << " mean_ssim ar="
              << fmt("%.6g", cmp.ar_scores.mean_ssim()) << " swr=" << fmt("%.6g", cmp.swr_scores.mean_ssim()) << "\n";
    return kExitOk;
}

// drift-sweep

int cmd_drift_sweep(const RunConfig& c) {
    DriftParams p;
    p.eps = c.drift.eps;
    p.delta_q = c.drift.delta_q;
    p.alpha = c.drift.alpha;
    p.horizon = c.drift.horizon;
    if (!(p.alpha < 1.0))
        throw InvalidArgument("drift-sweep: the SWR bound is undefined for alpha = 1");
    const fs::path out = prepare_output(c);
    Timings timings;
    const auto t0 = std::chrono::steady_clock::now();
    CsvWriter w(out / "drift_sweep.csv",
                {"window", "bound", "empirical_max", "eta_star", "ar_bound", "ar_empirical_max", "violating_trials"},
                c.seed);
    int violations = 0;
    for (int win : c.drift.windows) {
        DriftParams q = p;
        q.window = win;
        const DriftEnvelopes env = simulate_empirical(q, q.horizon, c.drift.trials, c.seed);
        violations += env.violating_trials;
        w.row({std::to_string(win), format_double(swr_bound(q)), format_double(env.swr_max()),
               format_double(eta_fixed_point(q)), format_double(ar_bound(q, q.horizon)), format_double(env.ar_max()),
               std::to_string(env.violating_trials)});
    }
    w.flush();
    timings.add("sweep", seconds_since(t0));
    timings.write(out / "timings.csv", c.seed);
    std::cout << "windows=" << c.drift.windows.size() << " trials=" << c.drift.trials << " T=" << c.drift.horizon
              << " violating_trials=" << violations << "\n";
    if (violations > 0)
        throw CheckFailure("drift-sweep: " + std::to_string(violations) + " trials exceeded the SWR bound");
    return kExitOk;
}

// grpo-train

/// Toy judge: every rubric dimension scores the target-token fraction on its own integer scale.
RewardFn rubric_reward(int target, const RubricArray& weights) {
    return [target, weights](std::span<const int> x) {
        double hits = 0.0;
        for (int t : x)
            hits += t == target;
        const double frac = hits / double(x.size());
        ScoreVector raw;
        for (std::size_t k = 0; k < kRubricDims; ++k)
            raw.values[k] = std::round(kRubricMax[k] * frac);
        return composite_reward(normalize_scores(raw), weights);
    };
}

RewardFn count_reward(int target) {
    return [target](std::span<const int> x) {
        double hits = 0.0;
        for (int t : x)
            hits += t == target;
        return hits;
    };
}

double preflight_error(const TabularPolicy& policy, const RewardFn& reward, const RunConfig& c) {
    Rng rng = derive_rng(c.seed, "grpo/preflight");
    TabularPolicy reference = policy, behaviour = policy;
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& v : reference.parameters())
        v += n(rng);
    for (auto& v : behaviour.parameters())
        v += n(rng);
    GrpoBatch batch;
    for (int j = 0; j < c.policy.group_size; ++j) {
        auto r = sample_rollout(behaviour, c.policy.length, rng);
        batch.rewards.push_back(reward(r.tokens));
        batch.logp_old.push_back(r.log_prob);
        batch.sequences.push_back(std::move(r.tokens));
    }
    batch.advantages = group_advantages(batch.rewards, c.reward.std_guard);
    return gradient_check_error(policy, reference, batch, c.reward);
}

int cmd_grpo_train(const RunConfig& c, const std::string& reward_kind, double fd_tol) {
    const fs::path out = prepare_output(c);
    Rng init = derive_rng(c.seed, "grpo/init");
    TabularPolicy policy = TabularPolicy::random(c.policy.vocab, init, c.policy.init_scale);
    const RewardFn reward =
        reward_kind == "rubric" ? rubric_reward(c.policy.target, c.reward.weights) : count_reward(c.policy.target);

    Timings timings;
    auto t0 = std::chrono::steady_clock::now();
    const double fd = preflight_error(policy, reward, c);
    timings.add("fd_preflight", seconds_since(t0));
    std::cout << "fd_preflight max_rel_error=" << fmt("%.3g", fd) << " tol=" << fmt("%.3g", fd_tol) << "\n";
    if (!(fd <= fd_tol))
        throw CheckFailure("grpo-train: finite-difference preflight failed (error " + fmt("%.3g", fd) + ")");

    TrainConfig tc;
    tc.group_size = c.policy.group_size;
    tc.iterations = c.policy.iterations;
    tc.length = c.policy.length;
    tc.lr = c.policy.lr;
    tc.updates_per_iteration = c.policy.updates_per_iteration;
    tc.reward = c.reward;
    const double before = expected_token_count(policy, c.policy.length, c.policy.target);
    t0 = std::chrono::steady_clock::now();
    const auto history = train(policy, reward, tc, c.seed);
    timings.add("train", seconds_since(t0));
    const double after = expected_token_count(policy, c.policy.length, c.policy.target);

    {
        CsvWriter w(out / "history.csv", {"iteration", "mean_reward", "kl", "grad_norm"}, c.seed);
        for (const auto& r : history)
            w.row({std::to_string(r.iteration), format_double(r.mean_reward), format_double(r.kl),
                   format_double(r.grad_norm)});
    }
    {
        nlohmann::ordered_json j;
        j["vocab"] = policy.vocab();
        std::vector<double> start(policy.row(-1).begin(), policy.row(-1).end());
        j["start_logits"] = start;
        std::vector<std::vector<double>> rows;
        for (int v = 0; v < policy.vocab(); ++v)
            rows.emplace_back(policy.row(v).begin(), policy.row(v).end());
        j["transition_logits"] = rows;
        std::ofstream(out / "policy.json") << j.dump(2) << "\n";
    }
    timings.write(out / "timings.csv", c.seed);

    if (history.empty()) {
        std::cout << "iterations=0 history empty\n";
        return kExitOk;
    }
    const std::size_t q = std::max<std::size_t>(1, history.size() / 4);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
        first += history[i].mean_reward / double(q);
        last += history[history.size() - q + i].mean_reward / double(q);
    }
    std::cout << "mean_reward first_quartile=" << fmt("%.4f", first) << " last_quartile=" << fmt("%.4f", last)
              << " trend=" << (last > first ? "increasing" : "not-increasing")
              << " expected_target_count before=" << fmt("%.4f", before) << " after=" << fmt("%.4f", after) << "\n";
    return kExitOk;
}

// metrics

struct MetricsArgs {
    std::string dir_a, dir_b, out_dir = "out";
    MotionMaskParams mask;
    bool roi_required = false;
};

int cmd_metrics(const MetricsArgs& a) {
    const Clip x = read_frames(a.dir_a), y = read_frames(a.dir_b);
    if (x.empty())
        throw InvalidArgument("metrics: no frames in " + a.dir_a);
    if (x.size() != y.size())
        throw InvalidArgument("metrics: frame counts differ (" + std::to_string(x.size()) + " vs " +
                              std::to_string(y.size()) + ")");
    for (std::size_t i = 0; i < x.size(); ++i)
        require_same_shape(x[i], y[i], "metrics");
    const Mask roi = x.size() >= 2 ? motion_mask(x, a.mask).union_mask : Mask(x[0].height, x[0].width);
    const double coverage = roi_coverage(roi);
    const bool have_roi = roi.count() > 0;
    if (!have_roi && a.roi_required)
        throw CheckFailure("empty ROI");

    fs::create_directories(a.out_dir);
    CsvWriter w(fs::path(a.out_dir) / "metrics.csv",
                {"frame_index", "mse", "psnr", "ssim", "roi_mse", "roi_psnr", "roi_ssim", "coverage"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sums(6, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = mse(x[i], y[i]);
        const std::vector<double> v{m,
                                    psnr_from_mse(m),
                                    ssim(x[i], y[i]).mean,
                                    have_roi ? roi_mse(x[i], y[i], roi) : nan,
                                    have_roi ? roi_psnr(x[i], y[i], roi) : nan,
                                    have_roi ? roi_ssim(x[i], y[i], roi) : nan};
        std::vector<std::string> row{std::to_string(i)};
        for (std::size_t k = 0; k < v.size(); ++k) {
            row.push_back(format_double(v[k]));
            sums[k] += v[k];
        }
        row.push_back(format_double(coverage));
        w.row(row);
    }
    std::vector<std::string> mean_row{"mean"};
    for (double s : sums)
        mean_row.push_back(format_double(s / double(x.size())));
    mean_row.push_back(format_double(coverage));
    w.row(mean_row);
    std::cout << "frames=" << x.size() << " mean_mse=" << mean_row[1] << " mean_ssim=" << mean_row[3]
              << " coverage=" << format_double(coverage) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wmtok: tokenized world-model rollout, drift, GRPO and metrics experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "wmtok 0.1.0");

    std::string levels = "7,5,5,5,5", fsq_out = "out";
    auto* fsq_cmd = app.add_subcommand("fsq-selftest", "Exhaustive FSQ index round-trip audit");
    fsq_cmd->add_option("--levels,-l", levels, "Comma-separated level counts")->capture_default_str();
    fsq_cmd->add_option("--out,-o", fsq_out, "Output directory")->capture_default_str();

    Common roll;
    bool full_scale = false;
    auto* roll_cmd = app.add_subcommand("rollout", "Run AR and SWR decoding side by side on the synthetic world");
    roll.add(roll_cmd);
    roll.overrides.add(roll_cmd, "--window,-W", [](RunConfig& c) -> int& { return c.decode.window; }, "SWR window");
    roll.overrides.add(roll_cmd, "--horizon,-T", [](RunConfig& c) -> int& { return c.decode.horizon; },
                       "Frames to generate");
    roll.overrides.add(roll_cmd, "--corruption,-p", [](RunConfig& c) -> double& { return c.decode.corruption; },
                       "Token corruption probability");
    roll.overrides.add(roll_cmd, "--compounding", [](RunConfig& c) -> bool& { return c.decode.compounding; },
                       "Corruption grows with generated blocks in the prompt");
    roll.overrides.add(roll_cmd, "--extent", [](RunConfig& c) -> int& { return c.world.extent; }, "Square size");
    roll.overrides.add(roll_cmd, "--stride", [](RunConfig& c) -> int& { return c.world.stride; }, "Move stride");
    roll_cmd->add_flag("--full-scale", full_scale, "256x320 world with N_c=1280, N_d=80, D_a=13, K=4375");

    Common drift;
    auto* drift_cmd = app.add_subcommand("drift-sweep", "Window sweep of the SWR drift bound against simulation");
    drift.add(drift_cmd);
    drift.overrides.add(drift_cmd, "--eps", [](RunConfig& c) -> double& { return c.drift.eps; }, "Per-step error");
    drift.overrides.add(drift_cmd, "--delta-q", [](RunConfig& c) -> double& { return c.drift.delta_q; },
                        "Re-encoding error");
    drift.overrides.add(drift_cmd, "--alpha", [](RunConfig& c) -> double& { return c.drift.alpha; },
                        "Error contraction factor");
    drift.overrides.add(drift_cmd, "--horizon,-T", [](RunConfig& c) -> int& { return c.drift.horizon; }, "Steps");
    drift.overrides.add(drift_cmd, "--trials", [](RunConfig& c) -> int& { return c.drift.trials; }, "Trials");
    drift.overrides.add(drift_cmd, "--windows", [](RunConfig& c) -> std::vector<int>& { return c.drift.windows; },
                        "Windows to sweep")
        ->delimiter(',');

    Common grpo;
    std::string reward_kind = "count";
    double fd_tol = 1e-4;
    auto* grpo_cmd = app.add_subcommand("grpo-train", "GRPO post-training of a tabular toy policy");
    grpo.add(grpo_cmd);
    grpo.overrides.add(grpo_cmd, "--vocab", [](RunConfig& c) -> int& { return c.policy.vocab; }, "Vocabulary size");
    grpo.overrides.add(grpo_cmd, "--length", [](RunConfig& c) -> int& { return c.policy.length; }, "Rollout length");
    grpo.overrides.add(grpo_cmd, "--target", [](RunConfig& c) -> int& { return c.policy.target; }, "Rewarded token");
    grpo.overrides.add(grpo_cmd, "--group-size,-G", [](RunConfig& c) -> int& { return c.policy.group_size; },
                       "Rollouts per group");
    grpo.overrides.add(grpo_cmd, "--iters", [](RunConfig& c) -> int& { return c.policy.iterations; }, "Iterations");
    grpo.overrides.add(grpo_cmd, "--lr", [](RunConfig& c) -> double& { return c.policy.lr; }, "Learning rate");
    grpo.overrides.add(grpo_cmd, "--init-scale", [](RunConfig& c) -> double& { return c.policy.init_scale; },
                       "Std of initial logits");
    grpo.overrides.add(grpo_cmd, "--clip", [](RunConfig& c) -> double& { return c.reward.clip; }, "Ratio clip");
    grpo.overrides.add(grpo_cmd, "--beta", [](RunConfig& c) -> double& { return c.reward.beta; }, "KL weight");
    grpo_cmd->add_option("--reward", reward_kind, "Reward: count of target tokens, or rubric composite")
        ->check(CLI::IsMember({"count", "rubric"}))
        ->capture_default_str();
    grpo_cmd->add_option("--fd-tol", fd_tol, "Finite-difference preflight tolerance")->capture_default_str();

    MetricsArgs margs;
    auto* metrics_cmd = app.add_subcommand("metrics", "Frame and ROI metrics between two frame directories");
    metrics_cmd->add_option("reference", margs.dir_a, "Reference frames (PGM/PPM)")->required();
    metrics_cmd->add_option("candidate", margs.dir_b, "Candidate frames (PGM/PPM)")->required();
    metrics_cmd->add_option("--out,-o", margs.out_dir, "Output directory")->capture_default_str();
    metrics_cmd->add_option("--tau", margs.mask.tau, "Temporal neighbourhood")->capture_default_str();
    metrics_cmd->add_option("--theta", margs.mask.theta, "Threshold on the 0-255 scale")->capture_default_str();
    metrics_cmd->add_option("--kernel,-k", margs.mask.kernel, "Disc diameter for closing and dilation")
        ->capture_default_str();
    metrics_cmd->add_flag("--roi-required", margs.roi_required, "Fail when the motion mask is empty");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (fsq_cmd->parsed())
            return cmd_fsq_selftest(levels, fsq_out);
        if (roll_cmd->parsed())
            return cmd_rollout(roll.resolve(), full_scale);
        if (drift_cmd->parsed())
            return cmd_drift_sweep(drift.resolve());
        if (grpo_cmd->parsed())
            return cmd_grpo_train(grpo.resolve(), reward_kind, fd_tol);
        if (metrics_cmd->parsed())
            return cmd_metrics(margs);
    } catch (const CheckFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheck;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheck;
    }
    return kExitUsage;
}
