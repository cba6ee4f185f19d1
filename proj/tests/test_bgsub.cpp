#include "lbtk/bgsub.hpp"

#include "lbtk/capture.hpp"
#include "lbtk/image_ops.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace lbtk;

namespace {

Image noisy_frame(const Image& base, double sigma, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Image out = base;
    for (int c = 0; c < out.channels(); ++c)
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                out.at(x, y, c) = float(std::clamp(double(out.at(x, y, c)) + noise(rng), 0.0, 1.0));
    return out;
}

/// One moving-object scene built from the simulator: a static pair, a
/// target pair (index 1), and update pairs at later positions.
struct SimScene {
    SceneFrames frames;
    BlurMask gt_mask;
};

SimScene make_scene(std::uint32_t seed, int width = 192, int height = 144, int pairs = 8,
                    int frames_per_exposure = 10, bool disc = false) {
    std::mt19937 rng(seed);
    const Image bg = oracle::textured_image(width, height, seed, 24, 0.2);

    const int side = 28;
    MotionScript script;
    script.background = bg;
    script.sprite = Image(side, side, 3, 0.0f);
    script.sprite_alpha = Plane::Zero(side, side);
    std::uniform_real_distribution<float> bright(0.75f, 1.0f);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const bool inside =
                !disc || std::hypot(x - (side - 1) / 2.0, y - (side - 1) / 2.0) <= side / 2.0;
            if (!inside) continue;
            script.sprite_alpha(y, x) = 1.0f;
            script.sprite.at(x, y, 0) = bright(rng);
            script.sprite.at(x, y, 1) = bright(rng) * 0.9f;
            script.sprite.at(x, y, 2) = bright(rng) * 0.8f;
        }

    // The object walks left to right; each capture spans a short travel.
    const double y0 = (height - side) / 2.0;
    const double travel = 12.0;
    const double spacing = double(width - side - 20) / pairs;

    SimScene out;
    const auto capture_at = [&](double x0) {
        script.transforms.clear();
        for (int f = 0; f < frames_per_exposure; ++f)
            script.transforms.push_back(
                {x0 + travel * f / (frames_per_exposure - 1), y0, 0.0});
        return simulate_pair(script);
    };

    out.frames.sharp_static = bg;
    out.frames.blur_static = bg;
    const SimulatedPair target = capture_at(10.0 + spacing);
    out.frames.sharp_target = target.sharp;
    out.frames.blur_target = target.blurred;
    out.gt_mask = target.gt_mask;
    for (int k = 2; k < pairs; ++k) {
        const SimulatedPair p = capture_at(10.0 + spacing * k);
        out.frames.other_pairs.emplace_back(p.sharp, p.blurred);
    }
    return out;
}

}  // namespace

TEST_SUITE("bgsub") {

TEST_CASE("a static scene stays background under repeated updates") {
    const Image frame = oracle::textured_image(48, 36, 61);
    GmmBackgroundModel model(48, 36, 3);
    model.initialize(frame);
    for (int i = 0; i < 10; ++i) {
        const FgLabelMap labels = model.update(frame);
        CHECK(labels.count(FgLabel::background) == 48 * 36);
    }
}

TEST_CASE("an intensity jump after convergence is foreground") {
    Image frame(32, 32, 3, 0.1f);
    GmmBackgroundModel model(32, 32, 3);
    model.initialize(frame);
    for (int i = 0; i < 30; ++i) model.update(frame);

    Image jumped = frame;
    for (int c = 0; c < 3; ++c) jumped.at(16, 16, c) = 0.9f;
    const FgLabelMap labels = model.segment(jumped);
    CHECK(labels.at(16, 16) == FgLabel::foreground);
    CHECK(labels.count(FgLabel::foreground) == 1);
}

TEST_CASE("gaussian sensor noise rarely triggers foreground") {
    const Image base = oracle::textured_image(64, 48, 62);
    GmmBackgroundModel model(64, 48, 3);
    model.initialize(noisy_frame(base, 0.01, 1000));
    FgLabelMap labels;
    for (int i = 0; i < 100; ++i) labels = model.update(noisy_frame(base, 0.01, 1001 + i));
    const double fg_rate =
        1.0 - double(labels.count(FgLabel::background)) / (64.0 * 48.0);
    CHECK(fg_rate < 0.01);
}

TEST_CASE("component weights stay normalized") {
    const Image base = oracle::textured_image(24, 18, 63);
    GmmBackgroundModel model(24, 18, 3);
    model.initialize(base);
    std::mt19937 rng(64);
    for (int i = 0; i < 40; ++i) {
        // Alternate the scene so several components get created.
        model.update(noisy_frame(i % 3 == 0 ? Image(24, 18, 3, 0.8f) : base, 0.02, 65 + i));
    }
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 24; ++x) {
            CHECK(model.weight_sum(x, y) <= 1.0 + 1e-6);
            CHECK(model.weight_sum(x, y) >= 1.0 - 1e-6);
            CHECK(model.active_components(x, y) >= 1);
            CHECK(model.active_components(x, y) <= model.options().max_components);
        }
}

TEST_CASE("chroma-consistent darkening labels as shadow") {
    Image base(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            base.at(x, y, 0) = 0.6f;
            base.at(x, y, 1) = 0.5f;
            base.at(x, y, 2) = 0.4f;
        }
    GmmBackgroundModel model(32, 32, 3);
    model.initialize(base);
    for (int i = 0; i < 20; ++i) model.update(base);

    Image shadowed = base;
    for (int c = 0; c < 3; ++c)
        for (int y = 8; y < 16; ++y)
            for (int x = 8; x < 16; ++x) shadowed.at(x, y, c) *= 0.7f;
    const FgLabelMap labels = model.segment(shadowed);
    CHECK(labels.at(10, 10) == FgLabel::shadow);
    CHECK(labels.at(2, 2) == FgLabel::background);
    // Only the three label values occur.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const FgLabel l = labels.at(x, y);
            CHECK((l == FgLabel::background || l == FgLabel::shadow ||
                   l == FgLabel::foreground));
        }
}

TEST_CASE("identical frames across a whole scene give an empty mask") {
    const Image frame = oracle::textured_image(96, 72, 66);
    SceneFrames scene;
    scene.sharp_static = frame;
    scene.blur_static = frame;
    scene.sharp_target = frame;
    scene.blur_target = frame;
    for (int k = 0; k < 5; ++k) scene.other_pairs.emplace_back(frame, frame);
    const LbfmgResult r = lbfmg_generate(scene);
    CHECK(r.mask.area() == 0.0);
    CHECK(r.mask.is_binary());
}

TEST_CASE("simulator scene mask overlaps the ground truth") {
    const SimScene scene = make_scene(67);
    const LbfmgResult r = lbfmg_generate(scene.frames);
    CHECK(r.mask.is_binary());
    const double iou = oracle::mask_iou(r.mask, scene.gt_mask);
    CHECK(iou >= 0.8);
}

TEST_CASE("mask generation is deterministic") {
    const SimScene scene = make_scene(68, 128, 96, 6, 8);
    const LbfmgResult a = lbfmg_generate(scene.frames);
    const LbfmgResult b = lbfmg_generate(scene.frames);
    CHECK((a.mask.values() == b.mask.values()).all());
}

TEST_CASE("the merged mask dominates each per-stream mask") {
    const SimScene scene = make_scene(69, 128, 96, 6, 8);
    const LbfmgResult r = lbfmg_generate(scene.frames);

    const auto morph = [](const Plane& p) {
        BlurMask m{Plane(p)};
        return dilate(erode(m, 5, 1), 5, 1);
    };
    const BlurMask sharp_only = morph(r.fg_sharp.above_background());
    const BlurMask blur_only = morph(r.fg_blur.above_background());
    for (int y = 0; y < r.mask.height(); ++y)
        for (int x = 0; x < r.mask.width(); ++x) {
            if (sharp_only.at(x, y) > 0.5f) CHECK(r.mask.at(x, y) == 1.0f);
            if (blur_only.at(x, y) > 0.5f) CHECK(r.mask.at(x, y) == 1.0f);
        }
}

TEST_CASE("missing static pair is an error") {
    SceneFrames scene;
    scene.sharp_target = Image(16, 16, 3, 0.5f);
    scene.blur_target = Image(16, 16, 3, 0.5f);
    CHECK_THROWS_AS((void)lbfmg_generate(scene), Error);
}

TEST_CASE("mask area fraction stays in a plausible band on random scenes") {
    for (std::uint32_t seed = 70; seed < 74; ++seed) {
        const SimScene scene = make_scene(seed, 160, 120, 6, 8, seed % 2 == 0);
        const LbfmgResult r = lbfmg_generate(scene.frames);
        const double fraction = r.mask.area_fraction();
        CHECK(fraction >= 0.01);
        CHECK(fraction <= 0.40);
    }
}

}  // TEST_SUITE
