#pragma once

#include "lbtk/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace lbtk {

/// Number of terms of the bivariate cubic basis
/// {x^3, x^2 y, x y^2, y^3, x^2, x y, y^2, x, y, 1}.
inline constexpr int kColorBasisTerms = 10;

std::array<double, kColorBasisTerms> color_basis_row(double nx, double ny);

/// Location-dependent per-channel gain field: for each color channel a
/// 10-term bivariate cubic in pixel coordinates normalized to [-1,1].
/// The gain must evaluate strictly positive over the calibrated frame.
class ColorCalibration {
public:
    ColorCalibration() = default;

    ColorCalibration(const std::array<std::array<double, kColorBasisTerms>, 3>& constants,
                     int frame_width, int frame_height)
        : constants_(constants), frame_width_(frame_width), frame_height_(frame_height) {
        require(frame_width > 0 && frame_height > 0, "calibration frame must be positive");
    }

    static ColorCalibration identity(int frame_width, int frame_height) {
        std::array<std::array<double, kColorBasisTerms>, 3> k{};
        for (auto& row : k) row[kColorBasisTerms - 1] = 1.0;
        return ColorCalibration(k, frame_width, frame_height);
    }

    const std::array<std::array<double, kColorBasisTerms>, 3>& constants() const {
        return constants_;
    }

    int frame_width() const { return frame_width_; }
    int frame_height() const { return frame_height_; }

    /// Pixel centers map to [-1,1]: nx = 2(x+0.5)/W - 1.
    double normalized_x(double x) const { return 2.0 * (x + 0.5) / frame_width_ - 1.0; }
    double normalized_y(double y) const { return 2.0 * (y + 0.5) / frame_height_ - 1.0; }

    /// Gain of channel c at pixel coordinates (x, y).
    double gain(int channel, double x, double y) const;

    /// Dense gain plane for one channel over the calibrated frame.
    PlaneD gain_plane(int channel) const;

    // Fit diagnostics and the patch layout used for fitting.
    std::array<double, 3> residual_rms{};
    std::vector<std::array<double, 2>> patch_centers;
    int patch_size = 0;

    std::string to_json_string() const;
    static ColorCalibration from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static ColorCalibration load(const std::string& path);

private:
    std::array<std::array<double, kColorBasisTerms>, 3> constants_{};
    int frame_width_ = 0;
    int frame_height_ = 0;
};

/// Fits per-channel gain constants from patch means measured on a flat
/// reference capture. gains are defined relative to the target patch:
/// alpha_k = mean(target) / mean(patch k) per channel, then least-squares
/// fitted over the cubic basis on normalized coordinates.
ColorCalibration fit_color_constants(const std::vector<std::array<double, 3>>& patch_means,
                                     const std::vector<std::array<double, 2>>& centers,
                                     int target_index, int frame_width, int frame_height,
                                     int patch_size = 0);

struct PatchGrid {
    std::vector<std::array<double, 3>> means;
    std::vector<std::array<double, 2>> centers;
    int patch_size = 0;
    /// Index of the grid cell closest to the frame center.
    int central_index = 0;
};

/// Measures per-channel means on a cols x rows grid of square patches.
PatchGrid measure_patch_grid(const Image& img, int grid_cols, int grid_rows);
PatchGrid measure_patch_grid(const BayerImage& raw, int grid_cols, int grid_rows);

/// Applies the gain field: P'(x,y) = alpha(x,y) * P(x,y) per channel.
Image color_correct(const Image& img, const ColorCalibration& calib);
BayerImage color_correct(const BayerImage& raw, const ColorCalibration& calib);

/// Per-channel global brightness correction, blurred -> sharp.
struct PhotometricGain {
    std::array<double, 3> beta{1.0, 1.0, 1.0};
};

PhotometricGain photometric_gain(const Image& blur, const Image& sharp);
PhotometricGain photometric_gain(const BayerImage& blur, const BayerImage& sharp);
Image apply_gain(const Image& img, const PhotometricGain& gain);
BayerImage apply_gain(const BayerImage& raw, const PhotometricGain& gain);

/// Normalized absolute luminance difference: sum |l_a - l_b| / sum l_b,
/// with luminance the per-pixel channel mean.
double delta_L(const Image& a, const Image& b);

}  // namespace lbtk
