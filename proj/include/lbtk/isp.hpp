#pragma once

#include "lbtk/image.hpp"

#include <array>
#include <span>
#include <vector>

namespace lbtk {

/// Gradient-corrected bilinear demosaic (Malvar-style 5x5 filters).
/// The native channel at each mosaic site passes through unchanged.
Image demosaic(const BayerImage& raw);

/// Samples the pattern's native channel at each site (the exact adjoint
/// used by the capture simulator).
BayerImage mosaic(const Image& img, BayerPattern pattern);

Image white_balance(const Image& img, const std::array<double, 3>& gains);

/// Per-pixel 3x3 color matrix, output clamped to [0,1].
Image color_map(const Image& img, const Eigen::Matrix3d& matrix);

/// Display encoding x^(1/gamma) on values clamped to [0,1].
Image gamma_correct(const Image& img, double gamma);

enum class IspStage { demosaic, white_balance, color_map, gamma };

struct IspConfig {
    std::array<double, 3> wb_gains{1.0, 1.0, 1.0};
    Eigen::Matrix3d color_matrix = Eigen::Matrix3d::Identity();
    double gamma = 2.2;
};

/// Fixed-order RAW to RGB conversion: demosaic, white balance, color map,
/// gamma. Any other stage order is rejected.
class IspPipeline {
public:
    explicit IspPipeline(IspConfig config = {});
    IspPipeline(IspConfig config, std::span<const IspStage> stage_order);

    static const std::vector<IspStage>& canonical_order();
    static void validate_order(std::span<const IspStage> stages);

    const IspConfig& config() const { return config_; }

    Image run(const BayerImage& raw) const;

private:
    IspConfig config_;
};

}  // namespace lbtk
