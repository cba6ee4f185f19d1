#pragma once

#include "lbtk/image.hpp"
#include "lbtk/image_ops.hpp"

#include <cstdint>
#include <vector>

namespace lbtk {

/// Counter-based generator: every value is a pure function of
/// (seed, stream, counter), so draws are reproducible and splittable
/// across threads with no shared state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const;

    /// Uniform double in [0, 1).
    double uniform(std::uint64_t stream, std::uint64_t counter) const;

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t stream, std::uint64_t counter,
                              std::uint64_t n) const;

private:
    std::uint64_t seed_;
};

struct PatchSpec {
    int x = 0;
    int y = 0;
    int size = 256;
    bool flip_h = false;
    bool flip_v = false;
    bool blur_branch = false;  // which branch produced the patch
};

/// Blur-aware patch cropping: half the draws are uniform crops, half are
/// centered on a uniformly chosen mask-positive pixel (clamped into
/// bounds). An empty mask falls back to the uniform branch.
class PatchSampler {
public:
    PatchSampler(int image_width, int image_height, const BlurMask& mask, int patch_size = 256);

    PatchSpec sample(std::uint64_t seed, std::uint64_t index) const;

    std::int64_t positive_count() const { return std::int64_t(positives_.size()); }

private:
    int width_, height_, patch_size_;
    std::vector<std::int32_t> positives_;  // linear indices of mask-positive pixels
};

PatchSpec bapc_sample(int image_width, int image_height, const BlurMask& mask,
                      std::uint64_t seed, std::uint64_t index = 0, int patch_size = 256);

/// Sets the two flip flags independently with probability 0.5 each.
PatchSpec augment(PatchSpec spec, std::uint64_t seed, std::uint64_t index);

/// Extracts the patch pixels with flips applied.
template <typename Scalar>
ImageT<Scalar> extract_patch(const ImageT<Scalar>& img, const PatchSpec& spec) {
    ImageT<Scalar> patch = crop(img, Rect{spec.x, spec.y, spec.size, spec.size});
    if (spec.flip_h) patch = flip_horizontal(patch);
    if (spec.flip_v) patch = flip_vertical(patch);
    return patch;
}

/// True when any pixel of the patch is mask-positive.
bool patch_contains_blur(const BlurMask& mask, const PatchSpec& spec);

}  // namespace lbtk
