#include "lbtk/metrics.hpp"

namespace lbtk {

std::array<double, 11> ssim_window() {
    static const std::array<double, 11> win = [] {
        std::array<double, 11> w{};
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < 11; ++i) {
            const double d = i - 5;
            w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += w[i];
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

namespace {

/// Per-pixel squared error averaged over channels.
PlaneD pixel_squared_error(const Image& a, const Image& b) {
    PlaneD se = PlaneD::Zero(a.height(), a.width());
    for (int c = 0; c < a.channels(); ++c)
        se += (a.plane(c).cast<double>() - b.plane(c).cast<double>()).square();
    return se / double(a.channels());
}

}  // namespace

double weighted_psnr(const Image& reference, const Image& test, const BlurMask& mask,
                     double peak, double eps) {
    require(reference.same_dims(test), "weighted PSNR needs matching dimensions");
    require(mask.width() == reference.width() && mask.height() == reference.height(),
            "mask dimensions mismatch");
    const PlaneD se = pixel_squared_error(reference, test);
    double num = 0.0, den = 0.0;
    for (int y = 0; y < reference.height(); ++y)
        for (int x = 0; x < reference.width(); ++x) {
            const double w = mask.at(x, y);
            if (w <= 0.0) continue;
            num += w * 10.0 * std::log10(peak * peak / (se(y, x) + eps));
            den += w;
        }
    require(den > 0.0, "empty evaluation region");
    return num / den;
}

double weighted_ssim(const Image& reference, const Image& test, const BlurMask& mask,
                     double peak) {
    require(reference.same_dims(test), "weighted SSIM needs matching dimensions");
    require(mask.width() == reference.width() && mask.height() == reference.height(),
            "mask dimensions mismatch");
    const PlaneD map = ssim_map(reference, test, peak);
    double num = 0.0, den = 0.0;
    for (int y = 0; y < reference.height(); ++y)
        for (int x = 0; x < reference.width(); ++x) {
            const double w = mask.at(x, y);
            num += w * map(y, x);
            den += w;
        }
    require(den > 0.0, "empty evaluation region");
    return num / den;
}

AlignedPsnrResult aligned_psnr(const Image& reference, const Image& test, int radius,
                               double peak) {
    require(reference.same_dims(test), "aligned PSNR needs matching dimensions");
    require(radius >= 0, "radius must be non-negative");
    require(reference.width() > radius && reference.height() > radius,
            "image too small for the search radius");

    AlignedPsnrResult best;
    bool first = true;
    for (int l = -radius; l <= radius; ++l)
        for (int k = -radius; k <= radius; ++k) {
            // Overlap of the test image shifted by (k, l) with the reference.
            const int x0 = std::max(0, k), y0 = std::max(0, l);
            const int w = reference.width() - std::abs(k);
            const int h = reference.height() - std::abs(l);
            double acc = 0.0;
            for (int c = 0; c < reference.channels(); ++c)
                acc += (reference.plane(c).block(y0, x0, h, w).cast<double>() -
                        test.plane(c).block(y0 - l, x0 - k, h, w).cast<double>())
                           .square()
                           .sum();
            const double mse = acc / (double(w) * h * reference.channels());
            const double value =
                mse < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
            if (first || value > best.psnr) {
                first = false;
                best.psnr = value;
                best.shift_x = k;
                best.shift_y = l;
            }
        }
    return best;
}

MetricReport evaluate_pair(const Image& reference, const Image& test, const BlurMask& mask,
                           int aligned_radius, double peak) {
    MetricReport report;
    report.psnr = psnr(reference, test, peak);
    report.ssim = ssim(reference, test, peak);
    report.weighted_psnr = weighted_psnr(reference, test, mask, peak);
    report.weighted_ssim = weighted_ssim(reference, test, mask, peak);
    const AlignedPsnrResult a = aligned_psnr(reference, test, aligned_radius, peak);
    report.aligned_psnr = a.psnr;
    report.aligned_shift_x = a.shift_x;
    report.aligned_shift_y = a.shift_y;
    return report;
}

}  // namespace lbtk
