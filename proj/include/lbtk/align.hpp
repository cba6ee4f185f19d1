#pragma once

#include "lbtk/image.hpp"

namespace lbtk {

struct FlowOptions {
    int levels = 3;            // pyramid depth
    int block_size = 64;       // correlation block side, per level
    int block_stride = 32;     // grid spacing between block origins
    double max_flow = 32.0;    // per-component clamp, full-resolution pixels
    double min_variance = 1e-6;  // below this a block counts as textureless
};

/// Estimated global translation between two rasters: b is a translated
/// by (dx, dy). peak is the normalized correlation maximum in [0,1].
struct TranslationEstimate {
    double dx = 0.0;
    double dy = 0.0;
    double peak = 0.0;

    double magnitude() const;
};

/// Whole-plane phase correlation with Hann windowing and parabolic
/// subpixel refinement. Fails on textureless input.
TranslationEstimate phase_correlate(const PlaneD& a, const PlaneD& b,
                                    double min_variance = 1e-6);

/// Dense flow mapping ref_a coordinates to ref_b: content at x in ref_a
/// appears at x + flow(x) in ref_b. Coarse-to-fine block phase
/// correlation interpolated to a per-pixel field; textureless blocks
/// inherit the coarser prediction with confidence 0.
FlowField estimate_flow(const Image& ref_a, const Image& ref_b, const FlowOptions& opts = {});

struct WarpResult {
    Image image;
    BlurMask valid;  // 1 where all samples stayed inside the source frame
};

/// Backward warp: out(x) = img(x + flow(x)), bilinear.
WarpResult warp(const Image& img, const FlowField& flow);

/// Magnitude in pixels of the global translation between two images,
/// measured by subpixel phase correlation on the luminance.
double geometric_error(const Image& a, const Image& b);

}  // namespace lbtk
