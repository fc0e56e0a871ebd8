#ifndef TOPOSEG_DIFFUSION_HPP
#define TOPOSEG_DIFFUSION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "toposeg/image.hpp"

namespace toposeg {

namespace detail {

/// Order-independent sum of up to four per-neighbor contributions.
/// Sorting first makes the result invariant under any permutation of the
/// neighbors, so the filters commute exactly with lattice rotations/flips.
inline double neighbor_sum(std::array<double, 4>& terms, int n) {
    std::sort(terms.begin(), terms.begin() + n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += terms[i];
    return s;
}

} // namespace detail

enum class ConductanceType { pm1, pm2 };

struct DiffusionParams {
    double tau = 0.2;       // explicit time step, (0, 0.25]
    int iters = 20;
    double kappa = 0.05;    // conductance scale (anisotropic only)
    ConductanceType g_type = ConductanceType::pm1;
};

inline void check_tau(double tau) {
    if (!(tau > 0.0 && tau <= 0.25))
        throw std::invalid_argument("tau must lie in (0, 0.25]");
}

/// Perona-Malik conductance. pm1: 1/(1+(s/k)^2), pm2: exp(-(s/k)^2).
/// Monotone non-increasing in grad_mag, g(0) = 1.
inline double conductance(double grad_mag, double kappa, ConductanceType g_type) {
    const double r = grad_mag / kappa;
    return g_type == ConductanceType::pm1 ? 1.0 / (1.0 + r * r)
                                          : std::exp(-r * r);
}

/// One explicit step of u' = u + tau * sum_{p in N4} (u_p - u_s).
/// No-flux boundary: out-of-bounds neighbors contribute nothing.
inline ImageBuffer isotropic_step(const ImageBuffer& img, double tau) {
    check_tau(tau);
    const int w = img.width(), h = img.height();
    std::vector<double> out(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = img.at(x, y);
            std::array<double, 4> terms;
            int n = 0;
            double lo = u, hi = u;
            auto add = [&](double up) {
                terms[n++] = up - u;
                lo = std::min(lo, up);
                hi = std::max(hi, up);
            };
            if (x > 0)     add(img.at(x - 1, y));
            if (x < w - 1) add(img.at(x + 1, y));
            if (y > 0)     add(img.at(x, y - 1));
            if (y < h - 1) add(img.at(x, y + 1));
            const double flux = detail::neighbor_sum(terms, n);
            // Clamp to the stencil extrema; mathematically a no-op for
            // tau <= 0.25, it only absorbs last-ulp rounding.
            out[img.idx(x, y)] = std::clamp(u + tau * flux, lo, hi);
        }
    }
    return ImageBuffer(w, h, std::move(out));
}

/// One explicit step with edge-wise Perona-Malik gating:
/// u' = u + tau * sum_{p in N4} g(|u_p - u_s|, kappa) * (u_p - u_s).
/// The gradient is evaluated per edge, so flux stays antisymmetric.
inline ImageBuffer anisotropic_step(const ImageBuffer& img, double tau,
                                    double kappa, ConductanceType g_type) {
    check_tau(tau);
    if (!(kappa > 0.0))
        throw std::invalid_argument("kappa must be > 0");
    const int w = img.width(), h = img.height();
    std::vector<double> out(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = img.at(x, y);
            std::array<double, 4> terms;
            int n = 0;
            double lo = u, hi = u;
            auto add = [&](double up) {
                const double d = up - u;
                terms[n++] = conductance(std::fabs(d), kappa, g_type) * d;
                lo = std::min(lo, up);
                hi = std::max(hi, up);
            };
            if (x > 0)     add(img.at(x - 1, y));
            if (x < w - 1) add(img.at(x + 1, y));
            if (y > 0)     add(img.at(x, y - 1));
            if (y < h - 1) add(img.at(x, y + 1));
            const double flux = detail::neighbor_sum(terms, n);
            out[img.idx(x, y)] = std::clamp(u + tau * flux, lo, hi);
        }
    }
    return ImageBuffer(w, h, std::move(out));
}

inline ImageBuffer isotropic_filter(const ImageBuffer& img, const DiffusionParams& p) {
    check_tau(p.tau);
    if (p.iters < 0)
        throw std::invalid_argument("iters must be >= 0");
    ImageBuffer u = img;
    for (int i = 0; i < p.iters; ++i)
        u = isotropic_step(u, p.tau);
    return u;
}

inline ImageBuffer anisotropic_filter(const ImageBuffer& img, const DiffusionParams& p) {
    check_tau(p.tau);
    if (p.iters < 0)
        throw std::invalid_argument("iters must be >= 0");
    ImageBuffer u = img;
    for (int i = 0; i < p.iters; ++i)
        u = anisotropic_step(u, p.tau, p.kappa, p.g_type);
    return u;
}

} // namespace toposeg

#endif
