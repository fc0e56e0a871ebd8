#ifndef TOPOSEG_IMAGE_HPP
#define TOPOSEG_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace toposeg {

/// W x H grayscale raster, row-major, intensities normalized to [0,1].
/// Stored as double; 8-bit quantization happens only at file boundaries.
class ImageBuffer {
public:
    ImageBuffer() = default;

    ImageBuffer(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * height, fill) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("ImageBuffer: dimensions must be >= 1");
        check_range(fill);
    }

    ImageBuffer(int width, int height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("ImageBuffer: dimensions must be >= 1");
        if (data_.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("ImageBuffer: data length != width*height");
        for (double v : data_) check_range(v);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }

    double at(int x, int y) const { return data_[idx(x, y)]; }
    double& at(int x, int y) { return data_[idx(x, y)]; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    const std::vector<double>& data() const { return data_; }

    bool same_shape(const ImageBuffer& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }

private:
    static void check_range(double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("ImageBuffer: intensity outside [0,1]");
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

struct NoiseSpec {
    double sigma = 0.1;   // intensity units, >= 0
    std::uint64_t seed = 0;
};

enum class SyntheticKind { step, disk, blob };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::step;
    int width = 64;
    int height = 64;
    double low = 0.2;
    double high = 0.8;
};

namespace detail {

inline int pnm_read_value(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines, then reads one ASCII integer.
    int c;
    while ((c = in.peek()) != EOF) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v))
        throw std::runtime_error(path + ": malformed header (expected integer at byte " +
                                 std::to_string(in.tellg() == -1 ? 0 : static_cast<long>(in.tellg())) + ")");
    return v;
}

} // namespace detail

/// Reads a PGM image (P2 ASCII or P5 binary), maxval <= 255.
/// Intensities are mapped to [0,1] by dividing by maxval.
inline ImageBuffer load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(path + ": cannot open file");

    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5")
        throw std::runtime_error(path + ": unsupported format '" + magic + "' (want P2 or P5)");

    const int w = detail::pnm_read_value(in, path);
    const int h = detail::pnm_read_value(in, path);
    const int maxval = detail::pnm_read_value(in, path);
    if (w < 1 || h < 1)
        throw std::runtime_error(path + ": invalid dimensions " + std::to_string(w) + "x" + std::to_string(h));
    if (maxval < 1 || maxval > 255)
        throw std::runtime_error(path + ": unsupported maxval " + std::to_string(maxval));

    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> data(n);

    if (magic == "P5") {
        in.get(); // single whitespace after maxval
        std::vector<unsigned char> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw std::runtime_error(path + ": truncated pixel data (got " +
                                     std::to_string(in.gcount()) + " of " + std::to_string(n) +
                                     " bytes)");
        for (std::size_t i = 0; i < n; ++i)
            data[i] = raw[i] / static_cast<double>(maxval);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int v = detail::pnm_read_value(in, path);
            if (v < 0 || v > maxval)
                throw std::runtime_error(path + ": sample " + std::to_string(v) + " out of range");
            data[i] = v / static_cast<double>(maxval);
        }
    }
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    return ImageBuffer(w, h, std::move(data));
}

/// Writes binary PGM (P5), maxval 255. Rounding is half away from zero,
/// so 0.5 maps to byte 128.
inline void save_image(const ImageBuffer& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error(path + ": cannot open file for writing");
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::round(img[i] * 255.0);
        raw[i] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

/// Additive i.i.d. Gaussian noise, clamped to [0,1] after addition.
/// Generator: std::mt19937_64 seeded with spec.seed, std::normal_distribution.
/// Bit-identical outputs for identical (img, spec).
inline ImageBuffer add_gaussian_noise(const ImageBuffer& img, const NoiseSpec& spec) {
    if (spec.sigma < 0.0)
        throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    if (spec.sigma == 0.0)
        return img;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> dist(0.0, spec.sigma);
    std::vector<double> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
        out[i] = std::clamp(img[i] + dist(rng), 0.0, 1.0);
    return ImageBuffer(img.width(), img.height(), std::move(out));
}

/// Synthetic test images.
///  step: columns < ceil(width/2) at low, the rest at high.
///  disk: centered disk of radius min(width,height)/4 (integer division) at
///        high on a low background; radius 0 degenerates to all-low.
///  blob: union of two overlapping disks, a rough hand-silhouette stand-in.
inline ImageBuffer make_synthetic(const SyntheticSpec& spec) {
    if (!(spec.low >= 0.0 && spec.low < spec.high && spec.high <= 1.0))
        throw std::invalid_argument("make_synthetic: need 0 <= low < high <= 1");
    const int w = spec.width, h = spec.height;
    ImageBuffer img(w, h, spec.low);

    auto fill_disk = [&](double cx, double cy, double r) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy < r * r)
                    img.at(x, y) = spec.high;
            }
    };

    switch (spec.kind) {
    case SyntheticKind::step: {
        const int split = (w + 1) / 2;
        for (int y = 0; y < h; ++y)
            for (int x = split; x < w; ++x)
                img.at(x, y) = spec.high;
        break;
    }
    case SyntheticKind::disk: {
        const int r = std::min(w, h) / 4;
        fill_disk((w - 1) / 2.0, (h - 1) / 2.0, static_cast<double>(r));
        break;
    }
    case SyntheticKind::blob: {
        // Fixed geometry: palm disk plus an offset finger-cluster disk.
        const double m = std::min(w, h);
        fill_disk(0.40 * (w - 1), 0.58 * (h - 1), 0.26 * m);
        fill_disk(0.62 * (w - 1), 0.36 * (h - 1), 0.18 * m);
        break;
    }
    }
    return img;
}

} // namespace toposeg

#endif
