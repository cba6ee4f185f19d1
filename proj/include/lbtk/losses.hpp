#pragma once

#include "lbtk/fft2.hpp"
#include "lbtk/image.hpp"
#include "lbtk/image_ops.hpp"
#include "lbtk/metrics.hpp"

#include <array>
#include <limits>
#include <span>
#include <vector>

namespace lbtk {

/// Loss term weights (lambda 1..4): mask, MAE, SSIM, MSFR.
struct LossWeights {
    double mask = 0.01;
    double mae = 1.0;
    double ssim = 1.0;
    double msfr = 0.1;
};

inline constexpr int kMsfrLevels = 3;

struct GateOutput {
    Image pred_sharp;
    BlurMask pred_mask;
};

/// Gate block forward pass: channel 3 of the feature map becomes a
/// sigmoid blur mask, channels 0..2 a residual that is masked and added
/// to the blurred input at this scale.
GateOutput gate_forward(const Image& features, const Image& blurred_scale);

template <typename Scalar>
double loss_mae(const ImageT<Scalar>& pred, const ImageT<Scalar>& gt) {
    require(pred.same_dims(gt), "MAE needs matching dimensions");
    double acc = 0.0;
    for (int c = 0; c < pred.channels(); ++c)
        acc += (pred.plane(c).template cast<double>() - gt.plane(c).template cast<double>())
                   .abs()
                   .sum();
    return acc / (double(pred.pixel_count()) * pred.channels());
}

template <typename Scalar>
double loss_mse(const ImageT<Scalar>& pred, const ImageT<Scalar>& gt) {
    return mean_squared_error(pred, gt);
}

double loss_mask(const BlurMask& pred, const BlurMask& gt);

template <typename Scalar>
double loss_ssim(const ImageT<Scalar>& pred, const ImageT<Scalar>& gt, double peak = 1.0) {
    return -ssim_map(gt, pred, peak).mean();
}

/// Frequency reconstruction loss over matching pyramids: the L1 distance
/// between unnormalized 2-D DFTs (real and imaginary parts both counted),
/// each level normalized by its element count 2*W*H*C.
template <typename Scalar>
double loss_msfr(std::span<const ImageT<Scalar>> pred_pyramid,
                 std::span<const ImageT<Scalar>> gt_pyramid) {
    require(pred_pyramid.size() == gt_pyramid.size() && !pred_pyramid.empty(),
            "mismatched pyramids");
    double total = 0.0;
    for (size_t k = 0; k < pred_pyramid.size(); ++k) {
        const auto& p = pred_pyramid[k];
        const auto& g = gt_pyramid[k];
        require(p.same_dims(g), "mismatched pyramids");
        double level = 0.0;
        for (int c = 0; c < p.channels(); ++c) {
            const ComplexMat fp = fft2(PlaneD(p.plane(c).template cast<double>()));
            const ComplexMat fg = fft2(PlaneD(g.plane(c).template cast<double>()));
            for (Eigen::Index i = 0; i < fp.size(); ++i) {
                const std::complex<double> d = fp(i) - fg(i);
                level += std::abs(d.real()) + std::abs(d.imag());
            }
        }
        total += level / (2.0 * double(p.pixel_count()) * p.channels());
    }
    return total;
}

/// MSFR on single images: builds the K-level box pyramid first.
template <typename Scalar>
double loss_msfr_images(const ImageT<Scalar>& pred, const ImageT<Scalar>& gt,
                        int levels = kMsfrLevels) {
    const auto pp = build_pyramid(pred, levels);
    const auto gp = build_pyramid(gt, levels);
    return loss_msfr<Scalar>(pp, gp);
}

struct ShiftInvariantResult {
    double value = std::numeric_limits<double>::infinity();
    int shift_x = 0;  // shift applied to the prediction at the minimum
    int shift_y = 0;
};

/// Minimum of a loss over the nine integer shifts of the prediction in
/// {-1,0,1}^2, each evaluated on the shifted overlap of both images.
template <typename Scalar, typename Fn>
ShiftInvariantResult shift_invariant_min(Fn&& fn, const ImageT<Scalar>& pred,
                                         const ImageT<Scalar>& gt) {
    require(pred.same_dims(gt), "shift-invariant loss needs matching dimensions");
    require(pred.width() >= 3 && pred.height() >= 3, "images must be at least 3x3");
    ShiftInvariantResult best;
    for (int l = -1; l <= 1; ++l)
        for (int k = -1; k <= 1; ++k) {
            const Rect r = shift_overlap<Scalar>(pred.width(), pred.height(), k, l);
            // Cropping the prediction at the back-shifted rectangle equals
            // shifting it by (k, l) and cropping the overlap.
            const ImageT<Scalar> pc = crop(pred, Rect{r.x - k, r.y - l, r.width, r.height});
            const ImageT<Scalar> gc = crop(gt, r);
            const double v = fn(pc, gc);
            if (v < best.value) {
                best.value = v;
                best.shift_x = k;
                best.shift_y = l;
            }
        }
    return best;
}

template <typename Scalar, typename Fn>
double shift_invariant(Fn&& fn, const ImageT<Scalar>& pred, const ImageT<Scalar>& gt) {
    return shift_invariant_min(fn, pred, gt).value;
}

double shift_invariant_mae(const Image& pred, const Image& gt);
double shift_invariant_mse(const Image& pred, const Image& gt);
double shift_invariant_ssim(const Image& pred, const Image& gt);
double shift_invariant_msfr(const Image& pred, const Image& gt);

struct LossBreakdown {
    double mask_term = 0.0;
    double mae_term = 0.0;
    double ssim_term = 0.0;
    double msfr_term = 0.0;
    double total = 0.0;
    std::array<int, 2> mask_shift{0, 0};
    std::array<int, 2> msfr_shift{0, 0};
    std::vector<std::array<int, 2>> mae_shifts;   // per pyramid level
    std::vector<std::array<int, 2>> ssim_shifts;  // per pyramid level
};

/// Weighted shift-invariant total: lambda1 * mask MSE + lambda2 * MAE +
/// lambda3 * SSIM + lambda4 * MSFR. MAE and SSIM average their per-level
/// minima over the pyramid; MSFR shares one shift across its levels as a
/// single term; the mask term uses the full-resolution masks.
LossBreakdown total_loss(std::span<const Image> pred_pyramid,
                         std::span<const Image> gt_pyramid, const BlurMask& pred_mask,
                         const BlurMask& gt_mask, const LossWeights& weights = {});

// Analytic gradients with respect to the prediction.
ImageD grad_mse(const ImageD& pred, const ImageD& gt);
ImageD grad_mae(const ImageD& pred, const ImageD& gt);  // 0 at exact ties
ImageD grad_msfr(const ImageD& pred, const ImageD& gt, int levels = kMsfrLevels);

enum class LossKind { mse, mae, msfr, ssim };

struct GradCheckReport {
    double max_rel_error = 0.0;
    int checked = 0;
    std::vector<std::array<int, 3>> skipped;  // (x, y, c) at kinks
};

/// Central-difference validation of the analytic gradient at random
/// coordinates. Non-differentiable coordinates (MAE ties, spectrum sign
/// changes within the step) are skipped and reported. For the SSIM loss,
/// which has no analytic gradient here, two step sizes are compared
/// against each other instead.
GradCheckReport grad_check(LossKind kind, const ImageD& pred, const ImageD& gt, double eps,
                           int coordinates = 32, std::uint64_t seed = 7);

}  // namespace lbtk
