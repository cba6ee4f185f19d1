#include "lbtk/synthblur.hpp"

#include "lbtk/image_ops.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace lbtk {

namespace {

struct Centroid {
    double x = 0.0, y = 0.0, area = 0.0;
    double max_radius = 0.0;
};

Centroid mask_centroid(const BlurMask& mask) {
    Centroid c;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y) > 0.5f) {
                c.x += x;
                c.y += y;
                c.area += 1.0;
            }
    if (c.area > 0.0) {
        c.x /= c.area;
        c.y /= c.area;
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                if (mask.at(x, y) > 0.5f)
                    c.max_radius = std::max(c.max_radius, std::hypot(x - c.x, y - c.y));
    }
    return c;
}

/// Zero outside the source plane, bilinear inside.
double sample_zero(const Plane& p, double sx, double sy) {
    const int w = int(p.cols()), h = int(p.rows());
    const int ix = int(std::floor(sx)), iy = int(std::floor(sy));
    const double fx = sx - ix, fy = sy - iy;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int qx = ix + dx, qy = iy + dy;
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            acc += (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * p(qy, qx);
        }
    return acc;
}

}  // namespace

double blur_span_px(const BlurMask& fg_mask, const SynthBlurOptions& opts) {
    if (opts.mode == BlurMode::translation) return std::abs(opts.magnitude);
    const Centroid c = mask_centroid(fg_mask);
    return c.max_radius * std::abs(opts.magnitude) * std::numbers::pi / 180.0;
}

SynthBlurResult synth_local_blur(const Image& sharp, const BlurMask& fg_mask,
                                 const SynthBlurOptions& opts) {
    require(sharp.channels() == 3, "synthetic blur expects a 3-channel image");
    require(fg_mask.width() == sharp.width() && fg_mask.height() == sharp.height(),
            "mask dimensions mismatch");
    require(fg_mask.is_binary(), "foreground mask must be binary");
    require(opts.steps >= 1, "steps must be positive");
    require(opts.kernel_size >= 1 && opts.kernel_size % 2 == 1, "kernel size must be odd");

    SynthBlurResult out;
    const Centroid ctr = mask_centroid(fg_mask);
    if (ctr.area == 0.0) {
        out.image = sharp;
        out.footprint = BlurMask(Plane::Zero(sharp.height(), sharp.width()));
        out.empty_mask = true;
        return out;
    }
    require(blur_span_px(fg_mask, opts) <= 70.0, "blur span exceeds 70 px");

    const int w = sharp.width(), h = sharp.height();

    // Premultiplied foreground layer; optionally kernel-blurred before motion.
    Plane alpha0 = (fg_mask.values() > 0.5f).cast<float>();
    std::vector<Plane> fg0(3);
    for (int c = 0; c < 3; ++c) fg0[c] = sharp.plane(c) * alpha0;
    if (opts.apply_kernel && opts.kernel_before_motion) {
        for (int c = 0; c < 3; ++c) fg0[c] = box_filter(fg0[c], opts.kernel_size);
        alpha0 = box_filter(alpha0, opts.kernel_size);
    }

    // Motion average of the transformed copies.
    PlaneD acc_alpha = PlaneD::Zero(h, w);
    std::vector<PlaneD> acc_fg(3, PlaneD::Zero(h, w));
    const double dir = opts.direction_deg * std::numbers::pi / 180.0;
    for (int s = 0; s < opts.steps; ++s) {
        const double t = opts.steps == 1 ? 0.0 : double(s) / (opts.steps - 1);
        if (opts.mode == BlurMode::translation) {
            const double dx = std::cos(dir) * opts.magnitude * t;
            const double dy = std::sin(dir) * opts.magnitude * t;
            if (dx == 0.0 && dy == 0.0) {
                acc_alpha += alpha0.cast<double>();
                for (int c = 0; c < 3; ++c) acc_fg[c] += fg0[c].cast<double>();
                continue;
            }
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double a = sample_zero(alpha0, x - dx, y - dy);
                    if (a == 0.0) continue;
                    acc_alpha(y, x) += a;
                    for (int c = 0; c < 3; ++c)
                        acc_fg[c](y, x) += sample_zero(fg0[c], x - dx, y - dy);
                }
        } else {
            const double theta = opts.magnitude * std::numbers::pi / 180.0 * t;
            if (theta == 0.0) {
                acc_alpha += alpha0.cast<double>();
                for (int c = 0; c < 3; ++c) acc_fg[c] += fg0[c].cast<double>();
                continue;
            }
            const double cs = std::cos(theta), sn = std::sin(theta);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    // Inverse rotation about the mask centroid.
                    const double rx = x - ctr.x, ry = y - ctr.y;
                    const double sx = cs * rx + sn * ry + ctr.x;
                    const double sy = -sn * rx + cs * ry + ctr.y;
                    const double a = sample_zero(alpha0, sx, sy);
                    if (a == 0.0) continue;
                    acc_alpha(y, x) += a;
                    for (int c = 0; c < 3; ++c) acc_fg[c](y, x) += sample_zero(fg0[c], sx, sy);
                }
        }
    }

    Plane mean_alpha = (acc_alpha / double(opts.steps)).cast<float>();
    std::vector<Plane> mean_fg(3);
    for (int c = 0; c < 3; ++c) mean_fg[c] = (acc_fg[c] / double(opts.steps)).cast<float>();

    if (opts.apply_kernel && !opts.kernel_before_motion) {
        mean_alpha = box_filter(mean_alpha, opts.kernel_size);
        for (int c = 0; c < 3; ++c) mean_fg[c] = box_filter(mean_fg[c], opts.kernel_size);
    }
    mean_alpha = mean_alpha.max(0.0f).min(1.0f);

    // Composite over the untouched input: where alpha is exactly zero the
    // arithmetic reduces to the input value bit for bit.
    out.image = Image(w, h, 3);
    for (int c = 0; c < 3; ++c)
        out.image.plane(c) =
            (mean_fg[c] + (1.0f - mean_alpha) * sharp.plane(c)).max(0.0f).min(1.0f);
    out.footprint = BlurMask(Plane((mean_alpha > 0.0f).cast<float>()));
    return out;
}

}  // namespace lbtk
