#pragma once

#include "common.hpp"
#include "frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace wmtok {

/// Mean squared difference over all pixels and channels.
inline double mse(const Frame& x, const Frame& y) {
    require_same_shape(x, y, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - y.data[i];
        s += d * d;
    }
    return s / double(x.data.size());
}

/// 10 log10(1 / mse); +inf when mse is zero.
inline double psnr_from_mse(double m) {
    if (m <= 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

inline double psnr(const Frame& x, const Frame& y) { return psnr_from_mse(mse(x, y)); }

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double c1 = 1e-4;
    double c2 = 9e-4;
};

/// Local SSIM values on the valid region: rows/cols [offset, offset + size).
struct SsimMap {
    int height = 0;
    int width = 0;
    int offset = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[std::size_t(r) * width + c]; }
};

struct SsimResult {
    double mean = 0.0;
    SsimMap map;
};

namespace detail {

inline std::vector<double> gaussian_taps(int n, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    const double c = 0.5 * (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        w[std::size_t(i)] = std::exp(-((i - c) * (i - c)) / (2 * sigma * sigma));
        sum += w[std::size_t(i)];
    }
    for (auto& v : w)
        v /= sum;
    return w;
}

// Separable valid-mode filter of a single-channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& taps) {
    const int n = int(taps.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> tmp(std::size_t(h) * ow, 0.0), out(std::size_t(oh) * ow, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += taps[std::size_t(k)] * plane[std::size_t(r) * w + c + k];
            tmp[std::size_t(r) * ow + c] = s;
        }
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += taps[std::size_t(k)] * tmp[std::size_t(r + k) * ow + c];
            out[std::size_t(r) * ow + c] = s;
        }
    return out;
}

} // namespace detail

/// Gaussian-window SSIM. Multi-channel maps are averaged over channels.
inline SsimResult ssim(const Frame& x, const Frame& y, const SsimParams& p = {}) {
    require_same_shape(x, y, "ssim");
    if (p.window < 1 || x.height < p.window || x.width < p.window)
        throw InvalidArgument("ssim: frame " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                              " smaller than window " + std::to_string(p.window));
    const auto taps = detail::gaussian_taps(p.window, p.sigma);
    const int h = x.height, w = x.width;
    SsimResult res;
    res.map.height = h - p.window + 1;
    res.map.width = w - p.window + 1;
    res.map.offset = p.window / 2;
    res.map.values.assign(std::size_t(res.map.height) * res.map.width, 0.0);
    std::vector<double> px(std::size_t(h) * w), py(px.size()), pxx(px.size()), pyy(px.size()), pxy(px.size());
    for (int ch = 0; ch < x.channels; ++ch) {
        for (std::size_t i = 0; i < px.size(); ++i) {
            const double a = x.data[i * x.channels + ch], b = y.data[i * y.channels + ch];
            px[i] = a;
            py[i] = b;
            pxx[i] = a * a;
            pyy[i] = b * b;
            pxy[i] = a * b;
        }
        const auto mx = detail::filter_valid(px, h, w, taps), my = detail::filter_valid(py, h, w, taps);
        const auto sxx = detail::filter_valid(pxx, h, w, taps), syy = detail::filter_valid(pyy, h, w, taps);
        const auto sxy = detail::filter_valid(pxy, h, w, taps);
        for (std::size_t i = 0; i < res.map.values.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
            const double num = (2 * mx[i] * my[i] + p.c1) * (2 * cxy + p.c2);
            const double den = (mx[i] * mx[i] + my[i] * my[i] + p.c1) * (vx + vy + p.c2);
            res.map.values[i] += num / den / x.channels;
        }
    }
    double s = 0.0;
    for (double v : res.map.values)
        s += v;
    res.mean = s / double(res.map.values.size());
    return res;
}

/// Mean absolute channel-averaged difference between frame t (1-based) and its
/// neighbours t' with 0 < |t'-t| <= tau inside the clip.
inline Frame frame_diff(const Clip& clip, int t, int tau) {
    const int n = int(clip.size());
    if (tau < 1)
        throw InvalidArgument("frame_diff: tau must be >= 1");
    if (t < 1 || t > n)
        throw InvalidArgument("frame_diff: t=" + std::to_string(t) + " outside [1," + std::to_string(n) + "]");
    if (n < 2)
        throw InvalidArgument("frame_diff: empty neighbourhood (clip has one frame)");
    const Frame& ref = clip[std::size_t(t - 1)];
    Frame d(ref.height, ref.width, 1, 0.0);
    int count = 0;
    for (int u = std::max(1, t - tau); u <= std::min(n, t + tau); ++u) {
        if (u == t)
            continue;
        const Frame& o = clip[std::size_t(u - 1)];
        require_same_shape(ref, o, "frame_diff");
        for (std::size_t i = 0; i < ref.pixels(); ++i) {
            double s = 0.0;
            for (int c = 0; c < ref.channels; ++c)
                s += std::abs(ref.data[i * ref.channels + c] - o.data[i * ref.channels + c]);
            d.data[i] += s / ref.channels;
        }
        ++count;
    }
    for (auto& v : d.data)
        v /= count;
    return d;
}

/// Offsets of the discrete disc di^2 + dj^2 <= (k/2)^2.
inline std::vector<std::pair<int, int>> disc_offsets(int k) {
    if (k < 1)
        throw InvalidArgument("morphology: kernel size must be >= 1");
    const double r2 = 0.25 * k * k;
    const int r = k / 2;
    std::vector<std::pair<int, int>> off;
    for (int di = -r; di <= r; ++di)
        for (int dj = -r; dj <= r; ++dj)
            if (di * di + dj * dj <= r2)
                off.emplace_back(di, dj);
    return off;
}

/// Pixels outside the image count as background.
inline Mask dilate(const Mask& m, int k) {
    const auto off = disc_offsets(k);
    Mask out(m.height, m.width);
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            if (!m.at(r, c))
                continue;
            for (auto [di, dj] : off) {
                const int rr = r + di, cc = c + dj;
                if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width)
                    out.at(rr, cc) = 1;
            }
        }
    return out;
}

/// Pixels outside the image count as foreground, so erosion never eats the border.
inline Mask erode(const Mask& m, int k) {
    const auto off = disc_offsets(k);
    Mask out(m.height, m.width);
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            bool keep = true;
            for (auto [di, dj] : off) {
                const int rr = r + di, cc = c + dj;
                if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width && !m.at(rr, cc)) {
                    keep = false;
                    break;
                }
            }
            out.at(r, c) = keep;
        }
    return out;
}

inline Mask close(const Mask& m, int k) { return erode(dilate(m, k), k); }

struct MotionMaskParams {
    int tau = 3;
    double theta = 15.0;
    int kernel = 15;
};

struct MotionMask {
    std::vector<Mask> per_frame;
    Mask union_mask;
    MotionMaskParams params;
};

/// Threshold D_t * 255 > theta, close then dilate with a disc of size k, union over frames.
inline MotionMask motion_mask(const Clip& clip, const MotionMaskParams& p = {}) {
    if (clip.size() < 2)
        throw InvalidArgument("motion_mask: clip needs at least 2 frames");
    MotionMask out;
    out.params = p;
    out.union_mask = Mask(clip.front().height, clip.front().width);
    for (int t = 1; t <= int(clip.size()); ++t) {
        const Frame d = frame_diff(clip, t, p.tau);
        Mask m(d.height, d.width);
        for (std::size_t i = 0; i < m.bits.size(); ++i)
            m.bits[i] = d.data[i] * 255.0 > p.theta;
        m = dilate(close(m, p.kernel), p.kernel);
        for (std::size_t i = 0; i < m.bits.size(); ++i)
            out.union_mask.bits[i] |= m.bits[i];
        out.per_frame.push_back(std::move(m));
    }
    return out;
}

inline double roi_coverage(const Mask& m) {
    if (m.bits.empty())
        return 0.0;
    return double(m.count()) / double(m.bits.size());
}

inline void check_mask(const Frame& x, const Mask& m) {
    if (m.height != x.height || m.width != x.width)
        throw InvalidArgument("roi: mask dimensions differ from frame");
}

/// Masked squared error divided by (channels * |M|).
inline double roi_mse(const Frame& x, const Frame& y, const Mask& m) {
    require_same_shape(x, y, "roi_mse");
    check_mask(x, m);
    const std::size_t n = m.count();
    if (n == 0)
        throw InvalidArgument("empty ROI");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        if (!m.bits[i / x.channels])
            continue;
        const double d = x.data[i] - y.data[i];
        s += d * d;
    }
    return s / double(n * x.channels);
}

inline double roi_psnr(const Frame& x, const Frame& y, const Mask& m) { return psnr_from_mse(roi_mse(x, y, m)); }

/// Mean of the local SSIM map over masked positions of its valid region.
inline double roi_ssim(const Frame& x, const Frame& y, const Mask& m, const SsimParams& p = {}) {
    require_same_shape(x, y, "roi_ssim");
    check_mask(x, m);
    const SsimResult s = ssim(x, y, p);
    double sum = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < s.map.height; ++r)
        for (int c = 0; c < s.map.width; ++c)
            if (m.at(r + s.map.offset, c + s.map.offset)) {
                sum += s.map.at(r, c);
                ++n;
            }
    if (n == 0)
        throw InvalidArgument("empty ROI");
    return sum / double(n);
}

enum class RoiKind { Mse, Psnr, Ssim };

inline double roi_metric(const Frame& x, const Frame& y, const Mask& m, RoiKind kind, const SsimParams& p = {}) {
    switch (kind) {
    case RoiKind::Mse: return roi_mse(x, y, m);
    case RoiKind::Psnr: return roi_psnr(x, y, m);
    case RoiKind::Ssim: return roi_ssim(x, y, m, p);
    }
    throw InvalidArgument("roi: unknown metric kind");
}

} // namespace wmtok
