#pragma once

#include "lbtk/image.hpp"
#include "lbtk/image_ops.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace lbtk {

inline constexpr double kPsnrCap = 100.0;        // dB, reported for MSE < 1e-10
inline constexpr double kWeightedPsnrEps = 1e-8;  // per-pixel squared-error floor

/// Mean squared error over all samples, accumulated in double.
template <typename Scalar>
double mean_squared_error(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
    require(a.same_dims(b), "MSE needs matching dimensions");
    double acc = 0.0;
    for (int c = 0; c < a.channels(); ++c)
        acc += (a.plane(c).template cast<double>() - b.plane(c).template cast<double>())
                   .square()
                   .sum();
    return acc / (double(a.pixel_count()) * a.channels());
}

template <typename Scalar>
double psnr(const ImageT<Scalar>& reference, const ImageT<Scalar>& test, double peak = 1.0) {
    const double mse = mean_squared_error(reference, test);
    if (mse < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

/// 11-tap Gaussian window, sigma 1.5, normalized. Borders mirror with
/// edge repetition (-1 -> 0).
std::array<double, 11> ssim_window();

/// Per-pixel SSIM averaged over channels. Constants K1=0.01, K2=0.03.
template <typename Scalar>
PlaneD ssim_map(const ImageT<Scalar>& a, const ImageT<Scalar>& b, double peak = 1.0);

template <typename Scalar>
double ssim(const ImageT<Scalar>& a, const ImageT<Scalar>& b, double peak = 1.0) {
    return ssim_map(a, b, peak).mean();
}

/// Mask-weighted mean of per-pixel PSNR, where the per-pixel squared
/// error is floored at kWeightedPsnrEps to stay defined at zero error.
double weighted_psnr(const Image& reference, const Image& test, const BlurMask& mask,
                     double peak = 1.0, double eps = kWeightedPsnrEps);

/// Mask-weighted mean of the per-pixel SSIM map.
double weighted_ssim(const Image& reference, const Image& test, const BlurMask& mask,
                     double peak = 1.0);

struct AlignedPsnrResult {
    double psnr = 0.0;
    int shift_x = 0;  // shift applied to the test image at the optimum
    int shift_y = 0;
};

/// Maximum PSNR over integer shifts of the test image within the search
/// radius, computed on the shifted overlap.
AlignedPsnrResult aligned_psnr(const Image& reference, const Image& test, int radius = 8,
                               double peak = 1.0);

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double weighted_psnr = 0.0;
    double weighted_ssim = 0.0;
    double aligned_psnr = 0.0;
    int aligned_shift_x = 0;
    int aligned_shift_y = 0;
};

MetricReport evaluate_pair(const Image& reference, const Image& test, const BlurMask& mask,
                           int aligned_radius = 8, double peak = 1.0);

// -- implementation --

namespace detail {

template <typename Scalar>
PlaneD gaussian_blur_mirrored(const PlaneT<Scalar>& p) {
    const auto& win = ssim_window();
    const int r = int(win.size()) / 2;
    const int w = int(p.cols()), h = int(p.rows());
    PlaneD tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d) acc += win[d + r] * double(p(y, reflect_index(x + d, w)));
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d) acc += win[d + r] * tmp(reflect_index(y + d, h), x);
            out(y, x) = acc;
        }
    return out;
}

}  // namespace detail

template <typename Scalar>
PlaneD ssim_map(const ImageT<Scalar>& a, const ImageT<Scalar>& b, double peak) {
    require(a.same_dims(b), "SSIM needs matching dimensions");
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    PlaneD acc = PlaneD::Zero(a.height(), a.width());
    for (int c = 0; c < a.channels(); ++c) {
        const PlaneD pa = a.plane(c).template cast<double>();
        const PlaneD pb = b.plane(c).template cast<double>();
        const PlaneD mu_a = detail::gaussian_blur_mirrored(pa);
        const PlaneD mu_b = detail::gaussian_blur_mirrored(pb);
        const PlaneD aa = detail::gaussian_blur_mirrored(PlaneD(pa * pa));
        const PlaneD bb = detail::gaussian_blur_mirrored(PlaneD(pb * pb));
        const PlaneD ab = detail::gaussian_blur_mirrored(PlaneD(pa * pb));
        const PlaneD var_a = aa - mu_a * mu_a;
        const PlaneD var_b = bb - mu_b * mu_b;
        const PlaneD cov = ab - mu_a * mu_b;
        acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
    return acc / double(a.channels());
}

}  // namespace lbtk
