#include "lbtk/sampler.hpp"

namespace lbtk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sampling streams.
constexpr std::uint64_t kBranchStream = 0;
constexpr std::uint64_t kUniformXStream = 1;
constexpr std::uint64_t kUniformYStream = 2;
constexpr std::uint64_t kBlurPickStream = 3;
constexpr std::uint64_t kFlipHStream = 4;
constexpr std::uint64_t kFlipVStream = 5;

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t counter) const {
    return splitmix64(splitmix64(seed_ ^ splitmix64(stream)) ^ counter);
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t counter) const {
    return double(bits(stream, counter) >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::uniform_int(std::uint64_t stream, std::uint64_t counter,
                                      std::uint64_t n) const {
    require(n > 0, "uniform_int needs a positive range");
    using u128 = unsigned __int128;
    return std::uint64_t((u128(bits(stream, counter)) * u128(n)) >> 64);
}

PatchSampler::PatchSampler(int image_width, int image_height, const BlurMask& mask,
                           int patch_size)
    : width_(image_width), height_(image_height), patch_size_(patch_size) {
    require(patch_size >= 1, "patch size must be positive");
    require(image_width >= patch_size && image_height >= patch_size,
            "image smaller than the patch size");
    require(mask.empty() || (mask.width() == image_width && mask.height() == image_height),
            "mask dimensions mismatch");
    if (!mask.empty()) {
        positives_.reserve(size_t(mask.width()) * mask.height() / 8);
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                if (mask.at(x, y) > 0.5f)
                    positives_.push_back(std::int32_t(y) * image_width + x);
    }
}

PatchSpec PatchSampler::sample(std::uint64_t seed, std::uint64_t index) const {
    const CounterRng rng(seed);
    PatchSpec spec;
    spec.size = patch_size_;
    const bool blur_branch = rng.uniform(kBranchStream, index) >= 0.5 && !positives_.empty();
    spec.blur_branch = blur_branch;
    if (blur_branch) {
        const std::int32_t pick = positives_[rng.uniform_int(
            kBlurPickStream, index, std::uint64_t(positives_.size()))];
        const int cx = pick % width_;
        const int cy = pick / width_;
        spec.x = std::clamp(cx - patch_size_ / 2, 0, width_ - patch_size_);
        spec.y = std::clamp(cy - patch_size_ / 2, 0, height_ - patch_size_);
    } else {
        spec.x = int(rng.uniform_int(kUniformXStream, index,
                                     std::uint64_t(width_ - patch_size_ + 1)));
        spec.y = int(rng.uniform_int(kUniformYStream, index,
                                     std::uint64_t(height_ - patch_size_ + 1)));
    }
    return spec;
}

PatchSpec bapc_sample(int image_width, int image_height, const BlurMask& mask,
                      std::uint64_t seed, std::uint64_t index, int patch_size) {
    return PatchSampler(image_width, image_height, mask, patch_size).sample(seed, index);
}

PatchSpec augment(PatchSpec spec, std::uint64_t seed, std::uint64_t index) {
    const CounterRng rng(seed);
    spec.flip_h = rng.uniform(kFlipHStream, index) < 0.5;
    spec.flip_v = rng.uniform(kFlipVStream, index) < 0.5;
    return spec;
}

bool patch_contains_blur(const BlurMask& mask, const PatchSpec& spec) {
    const int w = std::min(spec.size, mask.width() - spec.x);
    const int h = std::min(spec.size, mask.height() - spec.y);
    if (w <= 0 || h <= 0) return false;
    return (mask.values().block(spec.y, spec.x, h, w) > 0.5f).any();
}

}  // namespace lbtk
