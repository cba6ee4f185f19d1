#include "lbtk/bgsub.hpp"

#include "lbtk/image_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace lbtk {

namespace {
constexpr int kMaxChannels = 3;
}

struct GmmBackgroundModel::PixelView {
    float* weight;
    float* mean;  // [k * channels + c]
    float* var;
    std::uint8_t* active;
};

GmmBackgroundModel::GmmBackgroundModel(int width, int height, int channels, GmmOptions opts)
    : width_(width), height_(height), channels_(channels), opts_(std::move(opts)) {
    require(width > 0 && height > 0, "model dimensions must be positive");
    require(channels == 1 || channels == 3, "model supports 1 or 3 channels");
    require(opts_.max_components >= 1 && opts_.max_components <= 8,
            "component count out of range");
    require(opts_.learning_rate > 0.0 && opts_.learning_rate < 1.0,
            "learning rate must lie in (0,1)");
    require(opts_.var_floor > 0.0 && opts_.var_init >= opts_.var_floor,
            "variance settings invalid");
    const size_t n = size_t(width) * height;
    const size_t k = size_t(opts_.max_components);
    weight_.assign(n * k, 0.0f);
    mean_.assign(n * k * channels, 0.0f);
    var_.assign(n * k, float(opts_.var_init));
    active_.assign(n, 0);
}

void GmmBackgroundModel::initialize(const Image& static_frame) {
    require(static_frame.width() == width_ && static_frame.height() == height_ &&
                static_frame.channels() == channels_,
            "initialization frame dimensions mismatch");
    const size_t k = size_t(opts_.max_components);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const size_t i = size_t(y) * width_ + x;
            active_[i] = 1;
            weight_[i * k] = 1.0f;
            var_[i * k] = float(opts_.var_init);
            for (int c = 0; c < channels_; ++c)
                mean_[(i * k) * channels_ + c] = static_frame.at(x, y, c);
        }
}

FgLabel GmmBackgroundModel::classify_pixel(const PixelView& px, const float* value) const {
    const int n = *px.active;
    if (n == 0) return FgLabel::foreground;
    const double thresh2 = opts_.match_sigma * opts_.match_sigma;

    // Components ordered by fitness weight/sigma, best first.
    std::array<int, 8> order;
    for (int k = 0; k < n; ++k) order[k] = k;
    std::sort(order.begin(), order.begin() + n, [&](int a, int b) {
        return double(px.weight[a]) / std::sqrt(double(px.var[a])) >
               double(px.weight[b]) / std::sqrt(double(px.var[b]));
    });

    // Background components: the smallest high-fitness prefix whose
    // cumulative weight reaches the background ratio.
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += px.weight[k];
    int bg_count = 0;
    double cum = 0.0;
    for (int k = 0; k < n; ++k) {
        cum += px.weight[order[k]];
        ++bg_count;
        if (cum >= opts_.background_ratio * total) break;
    }

    int matched_rank = -1;
    for (int k = 0; k < n && matched_rank < 0; ++k) {
        const int j = order[k];
        double d2 = 0.0;
        for (int c = 0; c < channels_; ++c) {
            const double d = double(value[c]) - px.mean[j * channels_ + c];
            d2 += d * d;
        }
        if (d2 <= thresh2 * px.var[j] * channels_) matched_rank = k;
    }

    if (matched_rank >= 0 && matched_rank < bg_count) return FgLabel::background;

    if (opts_.detect_shadows) {
        // Shadow: brightness drop against a background component with the
        // chroma direction preserved.
        for (int k = 0; k < bg_count; ++k) {
            const int j = order[k];
            double num = 0.0, den = 0.0;
            for (int c = 0; c < channels_; ++c) {
                num += double(value[c]) * px.mean[j * channels_ + c];
                den += double(px.mean[j * channels_ + c]) * px.mean[j * channels_ + c];
            }
            if (den <= 1e-12) continue;
            const double ratio = num / den;
            if (ratio < opts_.shadow_ratio_low || ratio >= opts_.shadow_ratio_high) continue;
            double dist2 = 0.0;
            for (int c = 0; c < channels_; ++c) {
                const double d = double(value[c]) - ratio * px.mean[j * channels_ + c];
                dist2 += d * d;
            }
            if (dist2 <= thresh2 * px.var[j] * channels_) return FgLabel::shadow;
        }
    }
    return FgLabel::foreground;
}

void GmmBackgroundModel::learn_pixel(PixelView& px, const float* value) {
    const int n = *px.active;
    const double rho = opts_.learning_rate;
    const double thresh2 = opts_.match_sigma * opts_.match_sigma;

    int matched = -1;
    double best_fitness = -1.0;
    for (int k = 0; k < n; ++k) {
        double d2 = 0.0;
        for (int c = 0; c < channels_; ++c) {
            const double d = double(value[c]) - px.mean[k * channels_ + c];
            d2 += d * d;
        }
        if (d2 <= thresh2 * px.var[k] * channels_) {
            const double fit = double(px.weight[k]) / std::sqrt(double(px.var[k]));
            if (fit > best_fitness) {
                best_fitness = fit;
                matched = k;
            }
        }
    }

    if (matched >= 0) {
        double d2 = 0.0;
        for (int c = 0; c < channels_; ++c) {
            const double d = double(value[c]) - px.mean[matched * channels_ + c];
            d2 += d * d;
            px.mean[matched * channels_ + c] += float(rho * d);
        }
        px.var[matched] = float(std::max(
            (1.0 - rho) * px.var[matched] + rho * (d2 / channels_), opts_.var_floor));
        for (int k = 0; k < n; ++k)
            px.weight[k] = float((1.0 - rho) * px.weight[k] + (k == matched ? rho : 0.0));
    } else {
        int slot = n;
        if (n < opts_.max_components) {
            *px.active = std::uint8_t(n + 1);
        } else {
            slot = 0;
            for (int k = 1; k < n; ++k)
                if (px.weight[k] < px.weight[slot]) slot = k;
        }
        px.weight[slot] = float(rho);
        px.var[slot] = float(opts_.var_init);
        for (int c = 0; c < channels_; ++c) px.mean[slot * channels_ + c] = value[c];
    }

    const int active_now = *px.active;
    double total = 0.0;
    for (int k = 0; k < active_now; ++k) total += px.weight[k];
    if (total > 0.0)
        for (int k = 0; k < active_now; ++k) px.weight[k] = float(px.weight[k] / total);
}

FgLabelMap GmmBackgroundModel::segment(const Image& frame) const {
    require(frame.width() == width_ && frame.height() == height_ &&
                frame.channels() == channels_,
            "frame dimensions mismatch");
    FgLabelMap out(width_, height_);
    const size_t k = size_t(opts_.max_components);
    float value[kMaxChannels];
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const size_t i = size_t(y) * width_ + x;
            PixelView px{const_cast<float*>(&weight_[i * k]),
                         const_cast<float*>(&mean_[i * k * channels_]),
                         const_cast<float*>(&var_[i * k]),
                         const_cast<std::uint8_t*>(&active_[i])};
            for (int c = 0; c < channels_; ++c) value[c] = frame.at(x, y, c);
            out.set(x, y, classify_pixel(px, value));
        }
    return out;
}

FgLabelMap GmmBackgroundModel::update(const Image& frame) {
    FgLabelMap labels = segment(frame);
    const size_t k = size_t(opts_.max_components);
    float value[kMaxChannels];
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const size_t i = size_t(y) * width_ + x;
            PixelView px{&weight_[i * k], &mean_[i * k * channels_], &var_[i * k], &active_[i]};
            for (int c = 0; c < channels_; ++c) value[c] = frame.at(x, y, c);
            learn_pixel(px, value);
        }
    return labels;
}

double GmmBackgroundModel::weight_sum(int x, int y) const {
    const size_t i = size_t(y) * width_ + x;
    const size_t k = size_t(opts_.max_components);
    double total = 0.0;
    for (int j = 0; j < active_[i]; ++j) total += weight_[i * k + j];
    return total;
}

int GmmBackgroundModel::active_components(int x, int y) const {
    return active_[size_t(y) * width_ + x];
}

BlurMask combine_fg_masks(const FgLabelMap& fg_sharp, const FgLabelMap& fg_blur,
                          int morph_size, int morph_iterations) {
    require(fg_sharp.width() == fg_blur.width() && fg_sharp.height() == fg_blur.height(),
            "foreground maps must share dimensions");
    Plane merged =
        ((fg_sharp.above_background() > 0.5f) || (fg_blur.above_background() > 0.5f))
            .cast<float>();
    BlurMask mask(std::move(merged));
    if (morph_size > 1 && morph_iterations > 0) {
        mask = erode(mask, morph_size, morph_iterations);
        mask = dilate(mask, morph_size, morph_iterations);
    }
    return mask;
}

LbfmgResult lbfmg_generate(const SceneFrames& scene, const LbfmgOptions& opts) {
    require(!scene.sharp_static.empty() && !scene.blur_static.empty(),
            "scene is missing the static pair");
    require(!scene.sharp_target.empty() && !scene.blur_target.empty(),
            "scene is missing the target pair");
    require(scene.sharp_static.same_dims(scene.sharp_target) &&
                scene.blur_static.same_dims(scene.blur_target),
            "scene frames must share dimensions");

    GmmBackgroundModel sharp_model(scene.sharp_static.width(), scene.sharp_static.height(),
                                   scene.sharp_static.channels(), opts.gmm);
    GmmBackgroundModel blur_model(scene.blur_static.width(), scene.blur_static.height(),
                                  scene.blur_static.channels(), opts.gmm);
    sharp_model.initialize(scene.sharp_static);
    blur_model.initialize(scene.blur_static);

    for (const auto& [sharp_k, blur_k] : scene.other_pairs) {
        sharp_model.update(sharp_k);
        blur_model.update(blur_k);
    }

    LbfmgResult out;
    out.fg_sharp = sharp_model.segment(scene.sharp_target);
    out.fg_blur = blur_model.segment(scene.blur_target);
    out.mask = combine_fg_masks(out.fg_sharp, out.fg_blur, opts.morph_size,
                                opts.morph_iterations);
    return out;
}

}  // namespace lbtk
