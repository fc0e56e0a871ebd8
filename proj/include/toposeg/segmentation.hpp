#ifndef TOPOSEG_SEGMENTATION_HPP
#define TOPOSEG_SEGMENTATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "toposeg/image.hpp"
#include "toposeg/lattice.hpp"

namespace toposeg {

/// Per-pixel region labels partitioning the image. Labels are exactly
/// 0..R-1, renumbered in first-pixel row-major order.
struct SegmentationMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;

    int at(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }

    int region_count() const {
        return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    }
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

/// Renumber arbitrary component ids to 0..R-1 in first-pixel row-major order.
inline void renumber(std::vector<int>& labels) {
    std::map<int, int> remap;
    for (int& l : labels) {
        auto it = remap.try_emplace(l, static_cast<int>(remap.size())).first;
        l = it->second;
    }
}

/// Merge regions smaller than min_region_size into the 4-adjacent region
/// with the closest mean intensity. Smallest region first, ties by lower
/// label; repeats until no small region remains or one region is left.
inline void merge_small_regions(SegmentationMap& seg, const ImageBuffer& img,
                                int min_region_size) {
    const int w = seg.width, h = seg.height;
    while (true) {
        const int regions = seg.region_count();
        if (regions <= 1) break;

        std::vector<std::int64_t> count(regions, 0);
        std::vector<double> sum(regions, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int l = seg.at(x, y);
                ++count[l];
                sum[l] += img.at(x, y);
            }

        int victim = -1;
        for (int l = 0; l < regions; ++l)
            if (count[l] < min_region_size &&
                (victim < 0 || count[l] < count[victim]))
                victim = l;
        if (victim < 0) break;

        std::set<int> adjacent;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (seg.at(x, y) != victim) continue;
                if (x > 0 && seg.at(x - 1, y) != victim) adjacent.insert(seg.at(x - 1, y));
                if (x < w - 1 && seg.at(x + 1, y) != victim) adjacent.insert(seg.at(x + 1, y));
                if (y > 0 && seg.at(x, y - 1) != victim) adjacent.insert(seg.at(x, y - 1));
                if (y < h - 1 && seg.at(x, y + 1) != victim) adjacent.insert(seg.at(x, y + 1));
            }
        if (adjacent.empty()) break; // disconnected lattice cannot occur, but stay safe

        const double victim_mean = sum[victim] / count[victim];
        int target = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int l : adjacent) {
            const double d = std::fabs(sum[l] / count[l] - victim_mean);
            if (d < best) {
                best = d;
                target = l;
            }
        }
        for (int& l : seg.labels)
            if (l == victim) l = target;
        renumber(seg.labels);
    }
}

} // namespace detail

/// Connected components of the pixel graph whose edges are the non-cracked
/// lattice edges. No small-region merging (that needs intensities; see the
/// ImageBuffer overload).
inline SegmentationMap extract_segmentation(const DiffusivityField& kf) {
    const EdgeLattice& lat = kf.lattice();
    const int w = lat.width(), h = lat.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;

    detail::UnionFind uf(n);
    for (std::size_t e = 0; e < lat.edge_count(); ++e)
        if (!kf.is_cracked(e)) {
            auto [s, p] = lat.endpoints(e);
            uf.unite(s, p);
        }

    SegmentationMap seg{w, h, std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i)
        seg.labels[i] = static_cast<int>(uf.find(i));
    detail::renumber(seg.labels);
    return seg;
}

inline SegmentationMap extract_segmentation(const DiffusivityField& kf,
                                            const ImageBuffer& img,
                                            int min_region_size) {
    if (!kf.lattice().same_shape(img.width(), img.height()))
        throw std::invalid_argument("extract_segmentation: dimension mismatch");
    if (min_region_size < 1)
        throw std::invalid_argument("extract_segmentation: min_region_size must be >= 1");
    SegmentationMap seg = extract_segmentation(kf);
    if (min_region_size > 1)
        detail::merge_small_regions(seg, img, min_region_size);
    return seg;
}

/// Per-pixel continuum-style derivative field: D_T(x) = -(Gx^2 + Gy^2) with
/// central differences, one-sided at borders. Values are <= 0 everywhere.
inline std::vector<double> continuum_td_field(const ImageBuffer& img) {
    const int w = img.width(), h = img.height();
    std::vector<double> out(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            if (w > 1) {
                const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
                gx = (img.at(xr, y) - img.at(xl, y)) / (xr - xl);
            }
            if (h > 1) {
                const int yl = std::max(y - 1, 0), yr = std::min(y + 1, h - 1);
                gy = (img.at(x, yr) - img.at(x, yl)) / (yr - yl);
            }
            out[img.idx(x, y)] = -(gx * gx + gy * gy);
        }
    return out;
}

/// Default continuum cutoff. Chosen so a 0.6-contrast edge still registers
/// after heavy pre-smoothing (slope ~0.08, D_T ~ -0.007) while flat regions
/// with quantization-level ripple do not.
inline constexpr double default_continuum_threshold = -2e-3;

/// Threshold the continuum derivative field: pixels with D_T < threshold are
/// boundary; connected components of the rest become regions and boundary
/// pixels are absorbed into the adjacent region of closest mean intensity.
inline SegmentationMap continuum_td_segment(const ImageBuffer& img,
                                            double threshold,
                                            int min_region_size) {
    if (!(threshold < 0.0))
        throw std::invalid_argument("continuum_td_segment: threshold must be < 0");
    if (min_region_size < 1)
        throw std::invalid_argument("continuum_td_segment: min_region_size must be >= 1");

    const int w = img.width(), h = img.height();
    const std::size_t n = img.size();
    const std::vector<double> dt = continuum_td_field(img);

    std::vector<char> boundary(n);
    for (std::size_t i = 0; i < n; ++i)
        boundary[i] = dt[i] < threshold;

    detail::UnionFind uf(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = img.idx(x, y);
            if (boundary[i]) continue;
            if (x < w - 1 && !boundary[i + 1]) uf.unite(i, i + 1);
            if (y < h - 1 && !boundary[i + w]) uf.unite(i, i + w);
        }

    SegmentationMap seg{w, h, std::vector<int>(n, -1)};
    std::map<std::size_t, int> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (boundary[i]) continue;
        auto it = roots.try_emplace(uf.find(i), static_cast<int>(roots.size())).first;
        seg.labels[i] = it->second;
    }
    if (roots.empty()) {
        // Everything thresholded as boundary: fall back to a single region.
        std::fill(seg.labels.begin(), seg.labels.end(), 0);
        return seg;
    }

    // Region means over the initially labeled pixels only, kept fixed during
    // absorption so the result is order-independent.
    std::vector<double> sum(roots.size(), 0.0);
    std::vector<std::int64_t> count(roots.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
        if (seg.labels[i] >= 0) {
            sum[seg.labels[i]] += img[i];
            ++count[seg.labels[i]];
        }

    // Multi-pass absorption of boundary pixels into adjacent labeled regions.
    bool pending = true;
    while (pending) {
        pending = false;
        std::vector<int> next = seg.labels;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = img.idx(x, y);
                if (seg.labels[i] >= 0) continue;
                int best_label = -1;
                double best = std::numeric_limits<double>::infinity();
                auto consider = [&](int nx, int ny) {
                    const int l = seg.at(nx, ny);
                    if (l < 0) return;
                    const double d = std::fabs(sum[l] / count[l] - img[i]);
                    if (d < best || (d == best && l < best_label)) {
                        best = d;
                        best_label = l;
                    }
                };
                if (x > 0) consider(x - 1, y);
                if (x < w - 1) consider(x + 1, y);
                if (y > 0) consider(x, y - 1);
                if (y < h - 1) consider(x, y + 1);
                if (best_label >= 0)
                    next[i] = best_label;
                else
                    pending = true;
            }
        seg.labels = std::move(next);
    }

    detail::renumber(seg.labels);
    if (min_region_size > 1)
        detail::merge_small_regions(seg, img, min_region_size);
    return seg;
}

/// Connected components of equal-intensity 4-neighbors. Exact ground truth
/// for piecewise-constant images such as the synthetic test patterns.
inline SegmentationMap constant_region_segmentation(const ImageBuffer& img) {
    const int w = img.width(), h = img.height();
    const std::size_t n = img.size();
    detail::UnionFind uf(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = img.idx(x, y);
            if (x < w - 1 && img[i] == img[i + 1]) uf.unite(i, i + 1);
            if (y < h - 1 && img[i] == img[i + w]) uf.unite(i, i + w);
        }
    SegmentationMap seg{w, h, std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i)
        seg.labels[i] = static_cast<int>(uf.find(i));
    detail::renumber(seg.labels);
    return seg;
}

/// Lossless text serialization: "width height" then one row of labels per line.
inline void save_labels(const SegmentationMap& seg, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open file for writing");
    out << seg.width << " " << seg.height << "\n";
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x)
            out << (x ? " " : "") << seg.at(x, y);
        out << "\n";
    }
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

inline SegmentationMap load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open file");
    int w, h;
    if (!(in >> w >> h) || w < 1 || h < 1)
        throw std::runtime_error(path + ": malformed label grid header");
    SegmentationMap seg{w, h, std::vector<int>(static_cast<std::size_t>(w) * h)};
    for (int& l : seg.labels)
        if (!(in >> l) || l < 0)
            throw std::runtime_error(path + ": malformed or negative label");
    return seg;
}

/// Lossy viewable rendering: labels scaled across [0, 255].
inline ImageBuffer labels_to_image(const SegmentationMap& seg) {
    const int r = seg.region_count();
    std::vector<double> data(seg.labels.size(), 0.0);
    if (r > 1)
        for (std::size_t i = 0; i < data.size(); ++i)
            data[i] = static_cast<double>(seg.labels[i]) / (r - 1);
    return ImageBuffer(seg.width, seg.height, std::move(data));
}

} // namespace toposeg

#endif
