#pragma once

#include "lbtk/color_calib.hpp"
#include "lbtk/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace lbtk {

/// Physical capture parameters of the synchronized two-camera rig.
struct CaptureConfig {
    double pixel_pitch_m = 3.45e-6;    // sensor-pixel side length c
    double blur_extent_px = 40.0;      // desired blurry pixels n
    double object_distance_m = 3.0;    // d
    double image_distance_m = 0.016;   // l'
    double object_speed_mps = 1.0;     // v
    double transmittance = 0.05;       // density filter tau in (0,1]
};

struct ExposureTimes {
    double t_short = 0.0;  // seconds, sharp camera
    double t_long = 0.0;   // seconds, blurred camera (= t_short / tau)
};

/// t_short = c*n*d / (l' * v); t_long = t_short / tau.
ExposureTimes required_short_exposure(const CaptureConfig& cfg);

/// Rigid sprite placement for one simulated instant: the sprite's origin
/// lands at (dx, dy) and the sprite rotates by angle_deg about its center.
struct RigidTransform {
    double dx = 0.0;
    double dy = 0.0;
    double angle_deg = 0.0;
};

/// A moving foreground over a static background, sampled at F instants
/// spanning the long exposure. Frame 0 is the shared exposure start and
/// doubles as the sharp capture.
struct MotionScript {
    Image sprite;        // 3-channel foreground colors
    Plane sprite_alpha;  // coverage in [0,1], same dims as sprite
    Image background;    // 3-channel static scene
    std::vector<RigidTransform> transforms;
};

struct SimulatedPair {
    Image blurred;
    Image sharp;
    BlurMask gt_mask;
};

/// Composites the sprite over the background at one transform.
Image composite_frame(const MotionScript& script, const RigidTransform& t);

/// Long exposure as the unweighted mean of the F composited frames; the
/// sharp image is the frame-0 composite. The ground-truth mask is the
/// union of sprite footprints whenever the pair actually differs
/// (max channel difference above mask_eps anywhere).
SimulatedPair simulate_pair(const MotionScript& script, double mask_eps = 2.0 / 255.0);

/// Inverse of color correction: divides each sample by the gain field so
/// that color_correct recovers the input.
Image inject_color_cast(const Image& img, const ColorCalibration& calib);
BayerImage inject_color_cast(const BayerImage& raw, const ColorCalibration& calib);

/// Channel-wise brightness error (the inverse of photometric alignment).
Image inject_brightness(const Image& img, const std::array<double, 3>& gains);
BayerImage inject_brightness(const BayerImage& raw, const std::array<double, 3>& gains);

struct MisalignedImage {
    Image image;
    Rect valid;  // region where resampling never left the source frame
};

/// Subpixel translation by (dx, dy) with bilinear resampling, |dx|,|dy| <= 8.
MisalignedImage inject_misalignment(const Image& img, double dx, double dy);

// Motion scripts serialize as text, one transform per line: "dx dy angle_deg".
std::vector<RigidTransform> load_motion_script(const std::string& path);
void save_motion_script(const std::vector<RigidTransform>& transforms, const std::string& path);

}  // namespace lbtk
