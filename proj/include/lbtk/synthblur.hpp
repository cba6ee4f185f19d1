#pragma once

#include "lbtk/image.hpp"

namespace lbtk {

enum class BlurMode { translation, rotation };

struct SynthBlurOptions {
    BlurMode mode = BlurMode::translation;
    int steps = 5;
    double magnitude = 8.0;      // pixels of travel, or degrees for rotation
    double direction_deg = 0.0;  // translation path direction
    bool apply_kernel = true;    // 5x5 box after motion averaging
    int kernel_size = 5;
    bool kernel_before_motion = false;  // swap the two stages
};

struct SynthBlurResult {
    Image image;
    BlurMask footprint;     // union of transformed footprints incl. kernel support
    bool empty_mask = false;  // input mask had no foreground; image is the input
};

/// Maximum blur travel in pixels implied by the options and mask extent.
double blur_span_px(const BlurMask& fg_mask, const SynthBlurOptions& opts);

/// Blurs the masked foreground with a small motion average plus a box
/// kernel and composites it back over the untouched background. Pixels
/// outside the accumulated footprint are bit-identical to the input.
SynthBlurResult synth_local_blur(const Image& sharp, const BlurMask& fg_mask,
                                 const SynthBlurOptions& opts);

}  // namespace lbtk
