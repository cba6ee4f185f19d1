#include "lbtk/losses.hpp"

#include "lbtk/sampler.hpp"

#include <cmath>
#include <numbers>

namespace lbtk {

GateOutput gate_forward(const Image& features, const Image& blurred_scale) {
    require(features.channels() == 4, "gate expects a 4-channel feature map");
    require(blurred_scale.channels() == 3, "gate expects a 3-channel blurred input");
    require(features.width() == blurred_scale.width() &&
                features.height() == blurred_scale.height(),
            "gate feature map and blurred input dimensions mismatch");
    require(features.all_finite(), "feature map must be finite");

    const int w = features.width(), h = features.height();
    Plane mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double m = 1.0 / (1.0 + std::exp(-double(features.at(x, y, 3))));
            // Keep the sigmoid output strictly inside (0,1) after the
            // float rounding.
            mask(y, x) = std::min(std::max(float(m), std::numeric_limits<float>::min()),
                                  1.0f - std::numeric_limits<float>::epsilon() / 2);
        }

    GateOutput out;
    out.pred_sharp = Image(w, h, 3);
    for (int c = 0; c < 3; ++c)
        out.pred_sharp.plane(c) = blurred_scale.plane(c) + features.plane(c) * mask;
    out.pred_mask = BlurMask(std::move(mask));
    return out;
}

double loss_mask(const BlurMask& pred, const BlurMask& gt) {
    require(pred.width() == gt.width() && pred.height() == gt.height(),
            "mask loss needs matching dimensions");
    return (pred.values().cast<double>() - gt.values().cast<double>()).square().mean();
}

namespace {

Image mask_as_image(const BlurMask& m) { return Image::from_planes({m.values()}); }

}  // namespace

double shift_invariant_mae(const Image& pred, const Image& gt) {
    return shift_invariant([](const Image& p, const Image& g) { return loss_mae(p, g); }, pred,
                           gt);
}

double shift_invariant_mse(const Image& pred, const Image& gt) {
    return shift_invariant([](const Image& p, const Image& g) { return loss_mse(p, g); }, pred,
                           gt);
}

double shift_invariant_ssim(const Image& pred, const Image& gt) {
    return shift_invariant([](const Image& p, const Image& g) { return loss_ssim(p, g); }, pred,
                           gt);
}

double shift_invariant_msfr(const Image& pred, const Image& gt) {
    return shift_invariant(
        [](const Image& p, const Image& g) { return loss_msfr_images(p, g); }, pred, gt);
}

LossBreakdown total_loss(std::span<const Image> pred_pyramid,
                         std::span<const Image> gt_pyramid, const BlurMask& pred_mask,
                         const BlurMask& gt_mask, const LossWeights& weights) {
    require(pred_pyramid.size() == gt_pyramid.size() && !pred_pyramid.empty(),
            "mismatched pyramids");
    require(weights.mask >= 0 && weights.mae >= 0 && weights.ssim >= 0 && weights.msfr >= 0,
            "loss weights must be non-negative");
    const size_t levels = pred_pyramid.size();
    for (size_t k = 0; k < levels; ++k)
        require(pred_pyramid[k].same_dims(gt_pyramid[k]), "mismatched pyramids");

    LossBreakdown b;

    const auto mask_min = shift_invariant_min(
        [](const Image& p, const Image& g) { return loss_mse(p, g); }, mask_as_image(pred_mask),
        mask_as_image(gt_mask));
    b.mask_term = mask_min.value;
    b.mask_shift = {mask_min.shift_x, mask_min.shift_y};

    for (size_t k = 0; k < levels; ++k) {
        const auto mae_min = shift_invariant_min(
            [](const Image& p, const Image& g) { return loss_mae(p, g); }, pred_pyramid[k],
            gt_pyramid[k]);
        const auto ssim_min = shift_invariant_min(
            [](const Image& p, const Image& g) { return loss_ssim(p, g); }, pred_pyramid[k],
            gt_pyramid[k]);
        b.mae_term += mae_min.value;
        b.ssim_term += ssim_min.value;
        b.mae_shifts.push_back({mae_min.shift_x, mae_min.shift_y});
        b.ssim_shifts.push_back({ssim_min.shift_x, ssim_min.shift_y});
    }
    b.mae_term /= double(levels);
    b.ssim_term /= double(levels);

    // One shared shift across the MSFR pyramid, each level cropped on its
    // own grid.
    {
        double best = std::numeric_limits<double>::infinity();
        std::array<int, 2> best_shift{0, 0};
        for (int l = -1; l <= 1; ++l)
            for (int k = -1; k <= 1; ++k) {
                std::vector<Image> pc, gc;
                bool feasible = true;
                for (size_t lv = 0; lv < levels; ++lv) {
                    const auto& p = pred_pyramid[lv];
                    if (p.width() < 3 || p.height() < 3) {
                        feasible = std::abs(k) + std::abs(l) == 0;
                        if (!feasible) break;
                    }
                    const Rect r = shift_overlap<float>(p.width(), p.height(), k, l);
                    pc.push_back(crop(p, Rect{r.x - k, r.y - l, r.width, r.height}));
                    gc.push_back(crop(gt_pyramid[lv], r));
                }
                if (!feasible) continue;
                const double v = loss_msfr<float>(pc, gc);
                if (v < best) {
                    best = v;
                    best_shift = {k, l};
                }
            }
        b.msfr_term = best;
        b.msfr_shift = best_shift;
    }

    b.total = weights.mask * b.mask_term + weights.mae * b.mae_term +
              weights.ssim * b.ssim_term + weights.msfr * b.msfr_term;
    return b;
}

ImageD grad_mse(const ImageD& pred, const ImageD& gt) {
    require(pred.same_dims(gt), "gradient needs matching dimensions");
    const double n = double(pred.pixel_count()) * pred.channels();
    ImageD g(pred.width(), pred.height(), pred.channels());
    for (int c = 0; c < pred.channels(); ++c)
        g.plane(c) = 2.0 * (pred.plane(c) - gt.plane(c)) / n;
    return g;
}

ImageD grad_mae(const ImageD& pred, const ImageD& gt) {
    require(pred.same_dims(gt), "gradient needs matching dimensions");
    const double n = double(pred.pixel_count()) * pred.channels();
    ImageD g(pred.width(), pred.height(), pred.channels());
    for (int c = 0; c < pred.channels(); ++c)
        g.plane(c) = (pred.plane(c) - gt.plane(c)).sign() / n;
    return g;
}

namespace {

/// Adjoint of the 2x2 box downsample: spreads each coarse value over its
/// four children with weight 1/4. Odd trailing rows/columns receive 0.
PlaneD upsample_adjoint(const PlaneD& coarse, int fine_w, int fine_h) {
    PlaneD fine = PlaneD::Zero(fine_h, fine_w);
    for (int y = 0; y < coarse.rows(); ++y)
        for (int x = 0; x < coarse.cols(); ++x) {
            const double v = coarse(y, x) / 4.0;
            fine(2 * y, 2 * x) = v;
            fine(2 * y, 2 * x + 1) = v;
            fine(2 * y + 1, 2 * x) = v;
            fine(2 * y + 1, 2 * x + 1) = v;
        }
    return fine;
}

/// Per-level MSFR gradient: (1/t) Re[DFT(sign(Re D) - i sign(Im D))].
PlaneD msfr_level_gradient(const PlaneD& pred_plane, const PlaneD& gt_plane, double t) {
    const ComplexMat fp = fft2(pred_plane);
    const ComplexMat fg = fft2(gt_plane);
    ComplexMat signs(fp.rows(), fp.cols());
    for (Eigen::Index i = 0; i < fp.size(); ++i) {
        const std::complex<double> d = fp(i) - fg(i);
        const double sr = d.real() > 0 ? 1.0 : (d.real() < 0 ? -1.0 : 0.0);
        const double si = d.imag() > 0 ? 1.0 : (d.imag() < 0 ? -1.0 : 0.0);
        signs(i) = std::complex<double>(sr, -si);
    }
    const ComplexMat g = fft2(signs);
    PlaneD out(fp.rows(), fp.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = g(r, c).real() / t;
    return out;
}

}  // namespace

ImageD grad_msfr(const ImageD& pred, const ImageD& gt, int levels) {
    require(pred.same_dims(gt), "gradient needs matching dimensions");
    const auto pp = build_pyramid(pred, levels);
    const auto gp = build_pyramid(gt, levels);

    ImageD grad(pred.width(), pred.height(), pred.channels());
    for (int c = 0; c < pred.channels(); ++c) {
        PlaneD acc = PlaneD::Zero(pred.height(), pred.width());
        for (int k = levels - 1; k >= 0; --k) {
            const double t = 2.0 * double(pp[k].pixel_count()) * pp[k].channels();
            PlaneD g = msfr_level_gradient(pp[k].plane(c), gp[k].plane(c), t);
            // Chain the level gradient back through the box pyramid.
            for (int up = k; up >= 1; --up)
                g = upsample_adjoint(g, pp[up - 1].width(), pp[up - 1].height());
            acc += g;
        }
        grad.plane(c) = acc;
    }
    return grad;
}

namespace {

double eval_loss(LossKind kind, const ImageD& pred, const ImageD& gt) {
    switch (kind) {
        case LossKind::mse: return loss_mse(pred, gt);
        case LossKind::mae: return loss_mae(pred, gt);
        case LossKind::msfr: return loss_msfr_images(pred, gt);
        case LossKind::ssim: return loss_ssim(pred, gt);
    }
    fail("unknown loss kind");
}

/// True when perturbing pred(x,y,c) by +-eps can flip the sign of any
/// spectrum-difference bin, making the MSFR loss locally kinked.
bool msfr_kink_near(const ImageD& pred, const ImageD& gt, int x, int y, int c, double eps,
                    int levels) {
    const auto pp = build_pyramid(pred, levels);
    const auto gp = build_pyramid(gt, levels);
    double cx = double(x), cy = double(y);
    double chain = 1.0;
    for (int k = 0; k < levels; ++k) {
        const auto& p = pp[k];
        const int w = p.width(), h = p.height();
        const int ix = int(cx), iy = int(cy);
        if (ix >= w || iy >= h) break;  // dropped by an odd boundary
        const ComplexMat fp = fft2(p.plane(c));
        const ComplexMat fg = fft2(gp[k].plane(c));
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                const double theta =
                    2.0 * std::numbers::pi * (double(u) * ix / w + double(v) * iy / h);
                const std::complex<double> d = fp(v, u) - fg(v, u);
                // A bin is kink-adjacent only when this coordinate can
                // actually move the part across zero.
                const double infl_re = chain * std::abs(std::cos(theta));
                const double infl_im = chain * std::abs(std::sin(theta));
                const double margin = eps * 1.0001 + 1e-15;
                if ((infl_re > 1e-12 && std::abs(d.real()) <= margin * infl_re) ||
                    (infl_im > 1e-12 && std::abs(d.imag()) <= margin * infl_im))
                    return true;
            }
        cx = std::floor(cx / 2.0);
        cy = std::floor(cy / 2.0);
        chain /= 4.0;
    }
    return false;
}

}  // namespace

GradCheckReport grad_check(LossKind kind, const ImageD& pred, const ImageD& gt, double eps,
                           int coordinates, std::uint64_t seed) {
    require(pred.same_dims(gt), "gradient check needs matching dimensions");
    require(eps >= 1e-6 && eps <= 1e-3, "step size must lie in [1e-6, 1e-3]");
    require(coordinates >= 1, "need at least one probe coordinate");

    ImageD analytic;
    switch (kind) {
        case LossKind::mse: analytic = grad_mse(pred, gt); break;
        case LossKind::mae: analytic = grad_mae(pred, gt); break;
        case LossKind::msfr: analytic = grad_msfr(pred, gt); break;
        case LossKind::ssim: break;  // numeric-only consistency check
    }

    const CounterRng rng(seed);
    GradCheckReport report;
    ImageD probe = pred;
    for (int i = 0; i < coordinates; ++i) {
        const int x = int(rng.uniform_int(11, i, std::uint64_t(pred.width())));
        const int y = int(rng.uniform_int(12, i, std::uint64_t(pred.height())));
        const int c = int(rng.uniform_int(13, i, std::uint64_t(pred.channels())));

        if (kind == LossKind::mae && std::abs(pred.at(x, y, c) - gt.at(x, y, c)) <= 4.0 * eps) {
            report.skipped.push_back({x, y, c});
            continue;
        }
        if (kind == LossKind::msfr && msfr_kink_near(pred, gt, x, y, c, eps, kMsfrLevels)) {
            report.skipped.push_back({x, y, c});
            continue;
        }

        const double original = probe.at(x, y, c);
        probe.at(x, y, c) = original + eps;
        const double f_plus = eval_loss(kind, probe, gt);
        probe.at(x, y, c) = original - eps;
        const double f_minus = eval_loss(kind, probe, gt);
        probe.at(x, y, c) = original;
        const double fd = (f_plus - f_minus) / (2.0 * eps);

        double refv;
        if (kind == LossKind::ssim) {
            // No analytic form; compare against a half-step estimate.
            probe.at(x, y, c) = original + eps / 2.0;
            const double fp2 = eval_loss(kind, probe, gt);
            probe.at(x, y, c) = original - eps / 2.0;
            const double fm2 = eval_loss(kind, probe, gt);
            probe.at(x, y, c) = original;
            refv = (fp2 - fm2) / eps;
        } else {
            refv = analytic.at(x, y, c);
        }

        const double rel =
            std::abs(fd - refv) / std::max({std::abs(fd), std::abs(refv), 1e-12});
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

}  // namespace lbtk
