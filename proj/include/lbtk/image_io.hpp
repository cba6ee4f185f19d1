#pragma once

#include "lbtk/image.hpp"

#include <string>

namespace lbtk {

/// Sidecar metadata accompanying a Bayer mosaic stored as 16-bit PNG.
struct BayerSidecar {
    BayerPattern pattern = BayerPattern::RGGB;
    double black_level = 0.0;
    double white_level = 65535.0;
};

// 16-bit PNG. Channel counts 1/3/4 map to gray/RGB/RGBA. Values are
// scaled by the 16-bit range on write and back to [0,1] on read, so a
// round trip is exact to 1/65535 per sample.
Image load_png16(const std::string& path);
void save_png16(const Image& img, const std::string& path);

// 8-bit PNG, used for binary masks ({0,255} on disk).
BlurMask load_mask_png(const std::string& path);
void save_mask_png(const BlurMask& mask, const std::string& path);

// PFM (little-endian float), 1 or 3 channels. Lossless for float data.
Image load_pfm(const std::string& path);
void save_pfm(const Image& img, const std::string& path);

// Bayer mosaic: 16-bit single-channel PNG plus a key-value sidecar file
// (pattern, black level, white level) at <path>.meta. Samples are
// normalized by the black/white levels on load.
BayerImage load_bayer(const std::string& path);
void save_bayer(const BayerImage& raw, const std::string& path,
                const BayerSidecar& sidecar = {});

BayerSidecar load_sidecar(const std::string& path);
void save_sidecar(const BayerSidecar& sidecar, const std::string& path);

// Flow fields travel as 3-channel PFM: planes are (u, v, confidence).
FlowField load_flow_pfm(const std::string& path);
void save_flow_pfm(const FlowField& flow, const std::string& path);

/// Dispatches on extension: .pfm or .png (16-bit).
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

}  // namespace lbtk
