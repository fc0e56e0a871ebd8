#ifndef TOPOSEG_METRICS_HPP
#define TOPOSEG_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "toposeg/image.hpp"
#include "toposeg/segmentation.hpp"

namespace toposeg {

inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mse: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

/// 10*log10(max_val^2 / mse); +infinity for identical images.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b, double max_val = 1.0) {
    if (!(max_val > 0.0))
        throw std::invalid_argument("psnr: max_val must be > 0");
    const double m = mse(a, b);
    if (m == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / m);
}

inline int region_count(const SegmentationMap& seg) {
    return seg.region_count();
}

namespace detail {

inline std::vector<char> boundary_mask(const SegmentationMap& seg) {
    const int w = seg.width, h = seg.height;
    std::vector<char> mask(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int l = seg.at(x, y);
            const bool b = (x > 0 && seg.at(x - 1, y) != l) ||
                           (x < w - 1 && seg.at(x + 1, y) != l) ||
                           (y > 0 && seg.at(x, y - 1) != l) ||
                           (y < h - 1 && seg.at(x, y + 1) != l);
            mask[static_cast<std::size_t>(y) * w + x] = b;
        }
    return mask;
}

inline std::pair<std::int64_t, std::int64_t>
boundary_matches(const std::vector<char>& from, const std::vector<char>& to,
                 int w, int h, int tol) {
    std::int64_t total = 0, matched = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!from[static_cast<std::size_t>(y) * w + x]) continue;
            ++total;
            bool hit = false;
            for (int dy = -tol; dy <= tol && !hit; ++dy)
                for (int dx = -tol; dx <= tol && !hit; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < w && ny >= 0 && ny < h &&
                        to[static_cast<std::size_t>(ny) * w + nx])
                        hit = true;
                }
            if (hit) ++matched;
        }
    return {matched, total};
}

} // namespace detail

/// F1 of predicted region-boundary pixels against ground truth, matched
/// within Chebyshev distance tol. 1 when both boundaries are empty, 0 when
/// exactly one is.
inline double boundary_f1(const SegmentationMap& pred, const SegmentationMap& truth,
                          int tol) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw std::invalid_argument("boundary_f1: dimension mismatch");
    if (tol < 0)
        throw std::invalid_argument("boundary_f1: tol must be >= 0");

    const auto pb = detail::boundary_mask(pred);
    const auto tb = detail::boundary_mask(truth);
    const auto [p_hit, p_total] =
        detail::boundary_matches(pb, tb, pred.width, pred.height, tol);
    const auto [t_hit, t_total] =
        detail::boundary_matches(tb, pb, pred.width, pred.height, tol);

    if (p_total == 0 && t_total == 0) return 1.0;
    if (p_total == 0 || t_total == 0) return 0.0;
    const double precision = static_cast<double>(p_hit) / p_total;
    const double recall = static_cast<double>(t_hit) / t_total;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

/// Summary metrics for one pipeline run.
struct MetricsReport {
    double mse = 0.0;
    double psnr_db = std::numeric_limits<double>::infinity();
    std::int64_t cracks_total = 0;
    int regions = 0;
    int iterations_run = 0;
    double wall_time_ms = 0.0;
};

/// Per-outer-iteration record of a restoration run.
struct IterationRecord {
    int iteration = 0;          // strictly increasing from 0
    double cost = 0.0;          // cost functional after diffusion
    std::int64_t cracks_cumulative = 0;
    double mse_vs_reference = 0.0;
};

using IterationTrace = std::vector<IterationRecord>;

} // namespace toposeg

#endif
