#include <doctest.h>

#include <cmath>

#include "toposeg/diffusion.hpp"
#include "toposeg/metrics.hpp"
#include "test_util.hpp"

using namespace toposeg;
using test_util::random_image;
using test_util::total_intensity;

namespace {

double dirichlet_energy(const ImageBuffer& img) {
    double acc = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (x < img.width() - 1) {
                const double d = img.at(x + 1, y) - img.at(x, y);
                acc += d * d;
            }
            if (y < img.height() - 1) {
                const double d = img.at(x, y + 1) - img.at(x, y);
                acc += d * d;
            }
        }
    return acc;
}

} // namespace

TEST_CASE("isotropic step on constants and the 1x3 stencil") {
    ImageBuffer c(5, 7, 0.37);
    ImageBuffer out = isotropic_step(c, 0.2);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(out[i] == 0.37);

    ImageBuffer line(3, 1);
    line[1] = 1.0;
    ImageBuffer stepped = isotropic_step(line, 0.25);
    CHECK(stepped[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(stepped[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(stepped[2] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("tau outside (0, 0.25] is rejected") {
    ImageBuffer img(4, 4, 0.5);
    CHECK_THROWS_AS(isotropic_step(img, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(isotropic_step(img, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(anisotropic_step(img, -0.1, 0.05, ConductanceType::pm1),
                    std::invalid_argument);
    CHECK_THROWS_AS(anisotropic_step(img, 0.2, 0.0, ConductanceType::pm1),
                    std::invalid_argument);
}

TEST_CASE("conductance values at 0 and kappa") {
    CHECK(conductance(0.0, 0.05, ConductanceType::pm1) == 1.0);
    CHECK(conductance(0.0, 0.5, ConductanceType::pm2) == 1.0);
    CHECK(conductance(0.05, 0.05, ConductanceType::pm1) == doctest::Approx(0.5));
    CHECK(conductance(0.3, 0.3, ConductanceType::pm2) ==
          doctest::Approx(std::exp(-1.0)));
    // monotone non-increasing
    double prev = 1.0;
    for (double s = 0.0; s <= 1.0; s += 0.01) {
        const double g = conductance(s, 0.05, ConductanceType::pm1);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("anisotropic step hand evaluation on 1x2") {
    ImageBuffer img(2, 1);
    img[1] = 1.0;
    ImageBuffer out = anisotropic_step(img, 0.25, 1.0, ConductanceType::pm1);
    CHECK(out[0] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("conservation and maximum principle over random steps") {
    for (int trial = 0; trial < 50; ++trial) {
        ImageBuffer img = random_image(32, 32, 1000 + trial);
        const double before = total_intensity(img);
        double in_min = 1.0, in_max = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i) {
            in_min = std::min(in_min, img[i]);
            in_max = std::max(in_max, img[i]);
        }
        ImageBuffer iso = isotropic_step(img, 0.25);
        ImageBuffer aniso = anisotropic_step(img, 0.25, 0.05, ConductanceType::pm2);
        for (const ImageBuffer* out : {&iso, &aniso}) {
            CHECK(std::fabs(total_intensity(*out) - before) <= 1e-9 * before);
            for (std::size_t i = 0; i < out->size(); ++i) {
                CHECK((*out)[i] >= in_min);
                CHECK((*out)[i] <= in_max);
            }
        }
    }
}

TEST_CASE("isotropic step never increases the Dirichlet energy") {
    for (int trial = 0; trial < 10; ++trial) {
        ImageBuffer img = random_image(24, 24, 2000 + trial);
        ImageBuffer out = isotropic_step(img, 0.2);
        CHECK(dirichlet_energy(out) <= dirichlet_energy(img) + 1e-12);
    }
}

TEST_CASE("filters commute exactly with rot90 and horizontal flip") {
    DiffusionParams p{0.2, 7, 0.05, ConductanceType::pm1};
    for (int trial = 0; trial < 5; ++trial) {
        ImageBuffer img = random_image(16, 16, 3000 + trial);
        for (int variant = 0; variant < 2; ++variant) {
            auto apply = [&](const ImageBuffer& in) {
                return variant == 0 ? isotropic_filter(in, p)
                                    : anisotropic_filter(in, p);
            };
            ImageBuffer a = test_util::rot90(apply(img));
            ImageBuffer b = apply(test_util::rot90(img));
            for (std::size_t i = 0; i < a.size(); ++i)
                CHECK(a[i] == b[i]);
            ImageBuffer c = test_util::flip_h(apply(img));
            ImageBuffer d = apply(test_util::flip_h(img));
            for (std::size_t i = 0; i < c.size(); ++i)
                CHECK(c[i] == d[i]);
        }
    }
}

TEST_CASE("iters = 0 is the identity") {
    ImageBuffer img = random_image(9, 9, 5);
    DiffusionParams p;
    p.iters = 0;
    ImageBuffer a = isotropic_filter(img, p);
    ImageBuffer b = anisotropic_filter(img, p);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(a[i] == img[i]);
        CHECK(b[i] == img[i]);
    }
}

TEST_CASE("anisotropic preserves the step edge better than isotropic") {
    ImageBuffer img = make_synthetic({SyntheticKind::step, 32, 32, 0.2, 0.8});
    DiffusionParams p{0.2, 20, 0.05, ConductanceType::pm1};
    ImageBuffer iso = isotropic_filter(img, p);
    ImageBuffer aniso = anisotropic_filter(img, p);
    const int left = 32 / 2 - 1, right = 32 / 2;
    const double iso_jump = iso.at(right, 16) - iso.at(left, 16);
    const double aniso_jump = aniso.at(right, 16) - aniso.at(left, 16);
    CHECK(aniso_jump > iso_jump);
}

TEST_CASE("isotropic filtering denoises the noisy step") {
    ImageBuffer clean = make_synthetic({SyntheticKind::step, 64, 64, 0.2, 0.8});
    ImageBuffer noisy = add_gaussian_noise(clean, {0.1, 42});
    DiffusionParams p{0.2, 20, 0.05, ConductanceType::pm1};
    ImageBuffer restored = isotropic_filter(noisy, p);
    CHECK(psnr(restored, clean) > psnr(noisy, clean));
}
