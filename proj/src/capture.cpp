#include "lbtk/capture.hpp"

#include "lbtk/image_ops.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lbtk {

ExposureTimes required_short_exposure(const CaptureConfig& cfg) {
    require(cfg.pixel_pitch_m > 0 && cfg.blur_extent_px > 0 && cfg.object_distance_m > 0,
            "capture parameters must be positive");
    require(cfg.image_distance_m > 0 && cfg.object_speed_mps > 0,
            "exposure rule denominator must be positive");
    require(cfg.transmittance > 0 && cfg.transmittance <= 1.0,
            "filter transmittance must lie in (0,1]");
    ExposureTimes t;
    t.t_short = cfg.pixel_pitch_m * cfg.blur_extent_px * cfg.object_distance_m /
                (cfg.image_distance_m * cfg.object_speed_mps);
    t.t_long = t.t_short / cfg.transmittance;
    return t;
}

namespace {

void validate_script(const MotionScript& script) {
    require(!script.transforms.empty(), "motion script needs at least one frame");
    require(script.sprite.channels() == 3 && script.background.channels() == 3,
            "sprite and background must be 3-channel");
    require(script.sprite_alpha.rows() == script.sprite.height() &&
                script.sprite_alpha.cols() == script.sprite.width(),
            "sprite alpha must match sprite dimensions");

    const double cx = (script.sprite.width() - 1) / 2.0;
    const double cy = (script.sprite.height() - 1) / 2.0;
    for (const auto& t : script.transforms) {
        const double rad = t.angle_deg * std::numbers::pi / 180.0;
        const double cs = std::cos(rad), sn = std::sin(rad);
        const double corners[4][2] = {{0.0, 0.0},
                                      {double(script.sprite.width() - 1), 0.0},
                                      {0.0, double(script.sprite.height() - 1)},
                                      {double(script.sprite.width() - 1),
                                       double(script.sprite.height() - 1)}};
        for (const auto& corner : corners) {
            const double rx = cs * (corner[0] - cx) - sn * (corner[1] - cy) + cx + t.dx;
            const double ry = sn * (corner[0] - cx) + cs * (corner[1] - cy) + cy + t.dy;
            require(rx >= 0 && ry >= 0 && rx <= script.background.width() - 1 &&
                        ry <= script.background.height() - 1,
                    "transform moves the sprite outside the frame");
        }
    }
}

/// Sprite coverage of the frame under one transform, sampled bilinearly.
void splat_sprite(const MotionScript& script, const RigidTransform& t, Image& frame,
                  Plane* coverage) {
    const int sw = script.sprite.width(), sh = script.sprite.height();
    const double cx = (sw - 1) / 2.0, cy = (sh - 1) / 2.0;
    const double rad = t.angle_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);

    // Bounding box of the transformed sprite, padded for interpolation.
    const double half_diag = std::hypot(cx + 1.0, cy + 1.0);
    const int x0 = std::max(0, int(std::floor(cx + t.dx - half_diag)) - 1);
    const int y0 = std::max(0, int(std::floor(cy + t.dy - half_diag)) - 1);
    const int x1 = std::min(frame.width() - 1, int(std::ceil(cx + t.dx + half_diag)) + 1);
    const int y1 = std::min(frame.height() - 1, int(std::ceil(cy + t.dy + half_diag)) + 1);

    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            // Inverse map into sprite coordinates.
            const double fx = x - t.dx - cx, fy = y - t.dy - cy;
            const double sx = cs * fx + sn * fy + cx;
            const double sy = -sn * fx + cs * fy + cy;
            if (sx < -1.0 || sy < -1.0 || sx > sw || sy > sh) continue;

            // Sample alpha with zero outside the sprite.
            auto sample_zero = [&](const Plane& p, double px, double py) -> double {
                const int ix = int(std::floor(px)), iy = int(std::floor(py));
                const double ax = px - ix, ay = py - iy;
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        const int qx = ix + dx, qy = iy + dy;
                        if (qx < 0 || qy < 0 || qx >= sw || qy >= sh) continue;
                        const double w = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
                        acc += w * p(qy, qx);
                    }
                return acc;
            };

            const double a = sample_zero(script.sprite_alpha, sx, sy);
            if (a <= 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                const double s = sample_zero(script.sprite.plane(c), sx, sy);
                frame.at(x, y, c) = float((1.0 - a) * frame.at(x, y, c) + a * s);
            }
            if (coverage) (*coverage)(y, x) = std::max((*coverage)(y, x), float(a));
        }
}

}  // namespace

Image composite_frame(const MotionScript& script, const RigidTransform& t) {
    Image frame = script.background;
    splat_sprite(script, t, frame, nullptr);
    return frame;
}

SimulatedPair simulate_pair(const MotionScript& script, double mask_eps) {
    validate_script(script);
    const int w = script.background.width(), h = script.background.height();
    const int frames = static_cast<int>(script.transforms.size());

    Plane footprint = Plane::Zero(h, w);
    ImageD acc(w, h, 3);
    Image sharp;
    for (int f = 0; f < frames; ++f) {
        Image frame = script.background;
        splat_sprite(script, script.transforms[f], frame, &footprint);
        if (f == 0) sharp = frame;
        for (int c = 0; c < 3; ++c) acc.plane(c) += frame.plane(c).cast<double>();
    }

    Image blurred(w, h, 3);
    for (int c = 0; c < 3; ++c)
        blurred.plane(c) = (acc.plane(c) / double(frames)).cast<float>();

    // Per-pixel max channel difference decides whether any motion happened.
    Plane diff = (blurred.plane(0) - sharp.plane(0)).abs();
    for (int c = 1; c < 3; ++c) diff = diff.max((blurred.plane(c) - sharp.plane(c)).abs());
    const bool moved = (diff > float(mask_eps)).any();

    Plane mask = Plane::Zero(h, w);
    if (moved)
        mask = ((footprint > 0.0f) || (diff > float(mask_eps))).cast<float>();
    SimulatedPair out{std::move(blurred), std::move(sharp), BlurMask(std::move(mask))};
    return out;
}

Image inject_color_cast(const Image& img, const ColorCalibration& calib) {
    require(img.channels() == 3, "color cast injection expects a 3-channel image");
    Image out(img.width(), img.height(), 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                const double a = calib.gain(c, x, y);
                require(a > 0.0, "cast field must be positive over the frame");
                out.at(x, y, c) = float(img.at(x, y, c) / a);
            }
    return out;
}

BayerImage inject_color_cast(const BayerImage& raw, const ColorCalibration& calib) {
    BayerImage out(raw.width(), raw.height(), raw.pattern());
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) {
            const double a = calib.gain(raw.channel_at(x, y), x, y);
            require(a > 0.0, "cast field must be positive over the frame");
            out.at(x, y) = float(raw.at(x, y) / a);
        }
    return out;
}

Image inject_brightness(const Image& img, const std::array<double, 3>& gains) {
    require(img.channels() == 3, "brightness injection expects a 3-channel image");
    for (double g : gains) require(g > 0.0, "brightness gains must be positive");
    Image out(img.width(), img.height(), 3);
    for (int c = 0; c < 3; ++c) out.plane(c) = img.plane(c) * float(gains[c]);
    return out;
}

BayerImage inject_brightness(const BayerImage& raw, const std::array<double, 3>& gains) {
    for (double g : gains) require(g > 0.0, "brightness gains must be positive");
    BayerImage out(raw.width(), raw.height(), raw.pattern());
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x)
            out.at(x, y) = float(raw.at(x, y) * gains[raw.channel_at(x, y)]);
    return out;
}

MisalignedImage inject_misalignment(const Image& img, double dx, double dy) {
    require(std::abs(dx) <= 8.0 && std::abs(dy) <= 8.0,
            "misalignment magnitude limited to 8 px");
    MisalignedImage out;
    out.image = Image(img.width(), img.height(), img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.image.plane(c);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                float v;
                bilinear_sample(src, x - dx, y - dy, v);
                dst(y, x) = v;
            }
    }
    const int vx0 = std::max(0, int(std::ceil(dx)));
    const int vy0 = std::max(0, int(std::ceil(dy)));
    const int vx1 = std::min(img.width(), int(std::floor(img.width() - 1 + dx)) + 1);
    const int vy1 = std::min(img.height(), int(std::floor(img.height() - 1 + dy)) + 1);
    out.valid = Rect{vx0, vy0, vx1 - vx0, vy1 - vy0};
    return out;
}

std::vector<RigidTransform> load_motion_script(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open motion script: " + path);
    std::vector<RigidTransform> transforms;
    std::string line;
    while (std::getline(f, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        RigidTransform t;
        if (ls >> t.dx >> t.dy >> t.angle_deg) {
            transforms.push_back(t);
            continue;
        }
        std::istringstream check(line);
        std::string token;
        require(!(check >> token), "malformed motion script line: " + line);
    }
    require(!transforms.empty(), "motion script has no transforms: " + path);
    return transforms;
}

void save_motion_script(const std::vector<RigidTransform>& transforms, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open motion script for writing: " + path);
    f << "# dx dy angle_deg\n";
    for (const auto& t : transforms) f << t.dx << " " << t.dy << " " << t.angle_deg << "\n";
}

}  // namespace lbtk
