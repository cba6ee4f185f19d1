#include "lbtk/synthblur.hpp"

#include "lbtk/image_ops.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace lbtk;

namespace {

BlurMask square_mask(int w, int h, int x0, int y0, int side) {
    BlurMask m(w, h);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) m.set(x, y, 1.0f);
    return m;
}

/// Direct multi-copy averaging oracle for integer horizontal travel:
/// premultiplied copies accumulated with scalar loops, 5x5 box applied,
/// then composited over the untouched input.
Image translation_oracle(const Image& sharp, const BlurMask& mask, int steps, double magnitude) {
    const int w = sharp.width(), h = sharp.height();
    std::vector<std::vector<double>> alpha(h, std::vector<double>(w, 0.0));
    std::vector<std::vector<std::array<double, 3>>> fg(
        h, std::vector<std::array<double, 3>>(w, {0, 0, 0}));
    for (int s = 0; s < steps; ++s) {
        const int dx = int(std::lround(steps == 1 ? 0.0 : magnitude * s / (steps - 1)));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sx = x - dx;
                if (sx < 0 || sx >= w || mask.at(sx, y) <= 0.5f) continue;
                alpha[y][x] += 1.0;
                for (int c = 0; c < 3; ++c) fg[y][x][c] += sharp.at(sx, y, c);
            }
    }
    const auto box5 = [&](auto get, int x, int y) {
        double acc = 0.0;
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                acc += get(oracle::reflect(x + dx, w), oracle::reflect(y + dy, h));
        return acc / 25.0;
    };
    Image out(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double a =
                box5([&](int xx, int yy) { return alpha[yy][xx] / steps; }, x, y);
            for (int c = 0; c < 3; ++c) {
                const double f =
                    box5([&](int xx, int yy) { return fg[yy][xx][c] / steps; }, x, y);
                out.at(x, y, c) = float(std::clamp(
                    f + (1.0 - std::clamp(a, 0.0, 1.0)) * sharp.at(x, y, c), 0.0, 1.0));
            }
        }
    return out;
}

}  // namespace

TEST_SUITE("synthblur") {

TEST_CASE("no motion reduces to the kernel-only result") {
    const Image sharp = oracle::textured_image(48, 40, 81);
    const BlurMask mask = square_mask(48, 40, 16, 12, 12);
    SynthBlurOptions opts;
    opts.magnitude = 0.0;
    opts.steps = 1;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    const Image expect = translation_oracle(sharp, mask, 1, 0.0);
    for (int c = 0; c < 3; ++c)
        CHECK((r.image.plane(c) - expect.plane(c)).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("no motion and no kernel is the identity") {
    const Image sharp = oracle::textured_image(40, 32, 82);
    const BlurMask mask = square_mask(40, 32, 10, 10, 10);
    SynthBlurOptions opts;
    opts.magnitude = 0.0;
    opts.steps = 1;
    opts.apply_kernel = false;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    for (int c = 0; c < 3; ++c) CHECK((r.image.plane(c) == sharp.plane(c)).all());
}

TEST_CASE("square translation matches the multi-copy averaging oracle") {
    const Image sharp = oracle::textured_image(64, 48, 83);
    const BlurMask mask = square_mask(64, 48, 20, 16, 14);
    SynthBlurOptions opts;
    opts.magnitude = 4.0;
    opts.steps = 5;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    const Image expect = translation_oracle(sharp, mask, 5, 4.0);
    for (int c = 0; c < 3; ++c)
        CHECK((r.image.plane(c) - expect.plane(c)).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("background far outside the footprint is bit identical") {
    const Image sharp = oracle::textured_image(96, 64, 84);
    const BlurMask mask = square_mask(96, 64, 40, 24, 16);
    SynthBlurOptions opts;
    opts.magnitude = 6.0;
    opts.steps = 4;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 96; ++x) {
            // 10 px outside the swept region (x in [40,62], y in [24,40]).
            const bool near = x >= 30 && x <= 72 && y >= 14 && y <= 50;
            if (near) continue;
            CHECK(r.footprint.at(x, y) == 0.0f);
            for (int c = 0; c < 3; ++c) CHECK(r.image.at(x, y, c) == sharp.at(x, y, c));
        }
}

TEST_CASE("empty mask returns the input with a warning flag") {
    const Image sharp = oracle::textured_image(32, 24, 85);
    const BlurMask mask(32, 24);
    const SynthBlurResult r = synth_local_blur(sharp, mask, SynthBlurOptions{});
    CHECK(r.empty_mask);
    for (int c = 0; c < 3; ++c) CHECK((r.image.plane(c) == sharp.plane(c)).all());
}

TEST_CASE("brightness of the blurred region is conserved within 1 percent") {
    const Image sharp = oracle::textured_image(96, 72, 86);
    const BlurMask mask = square_mask(96, 72, 30, 26, 18);
    SynthBlurOptions opts;
    opts.magnitude = 8.0;
    opts.steps = 6;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);

    double sum_in = 0.0, sum_out = 0.0, region = 0.0;
    for (int c = 0; c < 3; ++c) {
        sum_in += sharp.plane(c).cast<double>().sum();
        sum_out += r.image.plane(c).cast<double>().sum();
    }
    for (int y = 0; y < 72; ++y)
        for (int x = 0; x < 96; ++x)
            if (mask.at(x, y) > 0.5f)
                for (int c = 0; c < 3; ++c) region += sharp.at(x, y, c);
    CHECK(std::abs(sum_out - sum_in) <= 0.01 * region);
}

TEST_CASE("blur span above 70 px is rejected") {
    const Image sharp(128, 128, 3, 0.5f);
    const BlurMask mask = square_mask(128, 128, 20, 20, 30);
    SynthBlurOptions opts;
    opts.magnitude = 71.0;
    CHECK_THROWS_AS((void)synth_local_blur(sharp, mask, opts), Error);

    SynthBlurOptions rot;
    rot.mode = BlurMode::rotation;
    rot.magnitude = 360.0;
    CHECK_THROWS_AS((void)synth_local_blur(sharp, mask, rot), Error);
}

TEST_CASE("rotation mode sweeps around the mask centroid") {
    const Image sharp = oracle::textured_image(80, 80, 87);
    const BlurMask mask = square_mask(80, 80, 30, 30, 20);
    SynthBlurOptions opts;
    opts.mode = BlurMode::rotation;
    opts.magnitude = 15.0;
    opts.steps = 7;
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    CHECK(r.image.all_finite());
    CHECK(!r.empty_mask);
    // The footprint contains the original mask and grows with the sweep.
    for (int y = 32; y < 48; ++y)
        for (int x = 32; x < 48; ++x) CHECK(r.footprint.at(x, y) == 1.0f);
    CHECK(r.footprint.area() > mask.area());
    // Far corners stay untouched.
    CHECK(r.image.at(2, 2, 0) == sharp.at(2, 2, 0));
}

}  // TEST_SUITE
