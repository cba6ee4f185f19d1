#pragma once

#include "lbtk/image.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace lbtk {

struct GmmOptions {
    int max_components = 5;
    double learning_rate = 0.05;           // rho
    double background_ratio = 0.9;         // cumulative weight marking background
    double match_sigma = 2.5;              // match threshold in standard deviations
    double var_init = (15.0 / 255.0) * (15.0 / 255.0);
    double var_floor = (4.0 / 255.0) * (4.0 / 255.0);
    bool detect_shadows = true;
    double shadow_ratio_low = 0.5;         // brightness drop band for shadows
    double shadow_ratio_high = 0.95;
};

enum class FgLabel : std::uint8_t { background = 0, shadow = 127, foreground = 255 };

/// Per-pixel segmentation labels using the 0/127/255 convention, so the
/// "label > 1" test selects shadow-or-foreground.
class FgLabelMap {
public:
    FgLabelMap() = default;
    FgLabelMap(int width, int height)
        : labels_(Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>::Zero(height, width)) {}

    int width() const { return static_cast<int>(labels_.cols()); }
    int height() const { return static_cast<int>(labels_.rows()); }

    FgLabel at(int x, int y) const { return FgLabel(labels_(y, x)); }
    void set(int x, int y, FgLabel l) { labels_(y, x) = std::uint8_t(l); }

    /// Binary plane of (label > 1), i.e. shadow or foreground.
    Plane above_background() const {
        return (labels_ > std::uint8_t(1)).cast<float>();
    }

    std::int64_t count(FgLabel l) const {
        return (labels_ == std::uint8_t(l)).count();
    }

private:
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels_;
};

/// Per-pixel Gaussian mixture over intensities with isotropic channel
/// variance, updated online at a fixed learning rate. The model is
/// mutable state and must be confined to one caller at a time.
class GmmBackgroundModel {
public:
    GmmBackgroundModel(int width, int height, int channels, GmmOptions opts = {});

    /// Resets every pixel to a single component centered on the frame.
    void initialize(const Image& static_frame);

    /// Classifies against the current model without learning.
    FgLabelMap segment(const Image& frame) const;

    /// Classifies against the current model, then learns the frame.
    FgLabelMap update(const Image& frame);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    const GmmOptions& options() const { return opts_; }

    /// Sum of component weights at one pixel (1 after any update).
    double weight_sum(int x, int y) const;
    int active_components(int x, int y) const;

private:
    struct PixelView;
    FgLabel classify_pixel(const PixelView& px, const float* value) const;
    void learn_pixel(PixelView& px, const float* value);

    int width_ = 0, height_ = 0, channels_ = 0;
    GmmOptions opts_;
    // Struct-of-arrays component storage, indexed [pixel * K + k].
    std::vector<float> weight_;
    std::vector<float> mean_;  // channel-major within a component
    std::vector<float> var_;
    std::vector<std::uint8_t> active_;
};

/// Frames of one scene arranged for mask generation: the static pair
/// initializes the models, the remaining pairs update them in order, and
/// the target pair is segmented last.
struct SceneFrames {
    Image sharp_static, blur_static;    // S0, B0
    Image sharp_target, blur_target;    // S1, B1
    std::vector<std::pair<Image, Image>> other_pairs;  // (Sk, Bk), k = 2..K
};

struct LbfmgOptions {
    GmmOptions gmm;
    int morph_size = 5;
    int morph_iterations = 1;
};

struct LbfmgResult {
    BlurMask mask;
    FgLabelMap fg_sharp;  // target sharp frame vs the sharp-stream model
    FgLabelMap fg_blur;   // target blurred frame vs the blur-stream model
};

/// OR of the two per-stream foregrounds followed by erosion then dilation.
BlurMask combine_fg_masks(const FgLabelMap& fg_sharp, const FgLabelMap& fg_blur,
                          int morph_size, int morph_iterations);

/// Ground-truth local blur mask generation over one scene: two mixture
/// models track the sharp and blurred streams; the target pair is
/// segmented against them and the foregrounds merged and cleaned.
LbfmgResult lbfmg_generate(const SceneFrames& scene, const LbfmgOptions& opts = {});

}  // namespace lbtk
