#ifndef TOPOSEG_LATTICE_HPP
#define TOPOSEG_LATTICE_HPP

#include <cstddef>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace toposeg {

/// Undirected edges of the 4-connected pixel lattice in a fixed total order:
/// all horizontal edges in row-major order, then all vertical edges in
/// row-major order. Edge count = h*(w-1) + w*(h-1).
class EdgeLattice {
public:
    EdgeLattice(int width, int height) : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("EdgeLattice: dimensions must be >= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }

    std::size_t horizontal_count() const {
        return static_cast<std::size_t>(height_) * (width_ - 1);
    }
    std::size_t vertical_count() const {
        return static_cast<std::size_t>(width_) * (height_ - 1);
    }
    std::size_t edge_count() const { return horizontal_count() + vertical_count(); }

    /// Pixel indices (row-major) joined by edge e.
    std::pair<std::size_t, std::size_t> endpoints(std::size_t e) const {
        if (e < horizontal_count()) {
            const std::size_t row = e / (width_ - 1);
            const std::size_t col = e % (width_ - 1);
            const std::size_t s = row * width_ + col;
            return {s, s + 1};
        }
        const std::size_t v = e - horizontal_count();
        if (v >= vertical_count())
            throw std::out_of_range("EdgeLattice: edge index out of range");
        const std::size_t row = v / width_;
        const std::size_t col = v % width_;
        const std::size_t s = row * width_ + col;
        return {s, s + width_};
    }

    /// Index of the horizontal edge between (x,y) and (x+1,y).
    std::size_t h_edge(int x, int y) const {
        return static_cast<std::size_t>(y) * (width_ - 1) + x;
    }
    /// Index of the vertical edge between (x,y) and (x,y+1).
    std::size_t v_edge(int x, int y) const {
        return horizontal_count() + static_cast<std::size_t>(y) * width_ + x;
    }

    bool same_shape(int w, int h) const { return width_ == w && height_ == h; }

private:
    int width_, height_;
};

/// Per-edge conductivity over the lattice. Values are two-point:
/// k_on = 1 (intact) or k_crack = 0 (cracked, transmits no flux).
class DiffusivityField {
public:
    static constexpr double k_on = 1.0;
    static constexpr double k_crack = 0.0;

    explicit DiffusivityField(EdgeLattice lattice)
        : lattice_(lattice), cracked_(lattice.edge_count(), false) {}

    const EdgeLattice& lattice() const { return lattice_; }

    double k(std::size_t e) const { return cracked_.at(e) ? k_crack : k_on; }
    bool is_cracked(std::size_t e) const { return cracked_.at(e); }

    void crack(std::size_t e) {
        if (!cracked_.at(e)) {
            cracked_[e] = true;
            ++crack_count_;
        }
    }
    void uncrack(std::size_t e) {
        if (cracked_.at(e)) {
            cracked_[e] = false;
            --crack_count_;
        }
    }

    std::size_t crack_count() const { return crack_count_; }
    std::size_t edge_count() const { return lattice_.edge_count(); }

private:
    EdgeLattice lattice_;
    std::vector<bool> cracked_;
    std::size_t crack_count_ = 0;
};

/// Edge indices cracked by one selection pass, ascending.
struct CrackSet {
    std::vector<std::size_t> cracked;

    bool empty() const { return cracked.empty(); }
    std::size_t size() const { return cracked.size(); }
};

} // namespace toposeg

#endif
