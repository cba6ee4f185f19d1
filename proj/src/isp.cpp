#include "lbtk/isp.hpp"

#include "lbtk/image_ops.hpp"

#include <cmath>

namespace lbtk {

namespace {

struct Tap {
    int dx, dy;
    double w;
};

// Malvar-He-Cutler gradient-corrected kernels, weights in eighths.
constexpr Tap kGreenAtChroma[] = {{0, -2, -1}, {0, -1, 2}, {-2, 0, -1}, {-1, 0, 2}, {0, 0, 4},
                                  {1, 0, 2},   {0, 2, -1}, {0, 1, 2},   {2, 0, -1}};

// Chroma at a green site whose same-color neighbors sit on this row.
constexpr Tap kChromaAtGreenRow[] = {{0, -2, 0.5}, {-1, -1, -1}, {1, -1, -1}, {-2, 0, -1},
                                     {-1, 0, 4},   {0, 0, 5},    {1, 0, 4},   {2, 0, -1},
                                     {-1, 1, -1},  {1, 1, -1},   {0, 2, 0.5}};

// Chroma at a green site whose same-color neighbors sit on this column.
constexpr Tap kChromaAtGreenCol[] = {{-2, 0, 0.5}, {-1, -1, -1}, {-1, 1, -1}, {0, -2, -1},
                                     {0, -1, 4},   {0, 0, 5},    {0, 1, 4},   {0, 2, -1},
                                     {1, -1, -1},  {1, 1, -1},   {2, 0, 0.5}};

// Chroma at the opposite chroma site (diagonal neighbors).
constexpr Tap kChromaAtChroma[] = {{0, -2, -1.5}, {-1, -1, 2}, {1, -1, 2},  {-2, 0, -1.5},
                                   {0, 0, 6},     {2, 0, -1.5}, {-1, 1, 2}, {1, 1, 2},
                                   {0, 2, -1.5}};

float apply_kernel(const BayerImage& raw, int x, int y, std::span<const Tap> taps) {
    const int w = raw.width(), h = raw.height();
    double acc = 0.0;
    for (const Tap& t : taps)
        acc += t.w * raw.at(reflect_index(x + t.dx, w), reflect_index(y + t.dy, h));
    return float(std::clamp(acc / 8.0, 0.0, 1.0));
}

}  // namespace

Image demosaic(const BayerImage& raw) {
    require(raw.width() % 2 == 0 && raw.height() % 2 == 0,
            "demosaic needs even mosaic dimensions");
    Image out(raw.width(), raw.height(), 3);
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) {
            const int native = raw.channel_at(x, y);
            out.at(x, y, native) = raw.at(x, y);
            if (native == 1) {
                // Green site: recover both chroma channels; orientation
                // follows which neighbor row carries each channel.
                const int row_ch = raw.channel_at(x + 1, y);
                const int col_ch = row_ch == 0 ? 2 : 0;
                out.at(x, y, row_ch) = apply_kernel(raw, x, y, kChromaAtGreenRow);
                out.at(x, y, col_ch) = apply_kernel(raw, x, y, kChromaAtGreenCol);
            } else {
                out.at(x, y, 1) = apply_kernel(raw, x, y, kGreenAtChroma);
                out.at(x, y, 2 - native) = apply_kernel(raw, x, y, kChromaAtChroma);
            }
        }
    return out;
}

BayerImage mosaic(const Image& img, BayerPattern pattern) {
    require(img.channels() == 3, "mosaic expects a 3-channel image");
    require(img.width() % 2 == 0 && img.height() % 2 == 0,
            "mosaic needs even image dimensions");
    BayerImage raw(img.width(), img.height(), pattern);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            raw.at(x, y) = img.at(x, y, raw.channel_at(x, y));
    return raw;
}

Image white_balance(const Image& img, const std::array<double, 3>& gains) {
    require(img.channels() == 3, "white balance expects a 3-channel image");
    for (double g : gains) require(g > 0.0, "white balance gains must be positive");
    Image out(img.width(), img.height(), 3);
    for (int c = 0; c < 3; ++c) out.plane(c) = img.plane(c) * float(gains[c]);
    return out;
}

Image color_map(const Image& img, const Eigen::Matrix3d& matrix) {
    require(img.channels() == 3, "color mapping expects a 3-channel image");
    Image out(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Eigen::Vector3d in(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
            const Eigen::Vector3d v = matrix * in;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = float(std::clamp(v(c), 0.0, 1.0));
        }
    return out;
}

Image gamma_correct(const Image& img, double gamma) {
    require(gamma > 0.0, "gamma must be positive");
    Image out(img.width(), img.height(), img.channels());
    const double inv = 1.0 / gamma;
    for (int c = 0; c < img.channels(); ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.plane(c);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                dst(y, x) = float(std::pow(std::clamp(double(src(y, x)), 0.0, 1.0), inv));
    }
    return out;
}

IspPipeline::IspPipeline(IspConfig config) : config_(std::move(config)) {
    require(config_.gamma > 0.0, "gamma must be positive");
}

IspPipeline::IspPipeline(IspConfig config, std::span<const IspStage> stage_order)
    : IspPipeline(std::move(config)) {
    validate_order(stage_order);
}

const std::vector<IspStage>& IspPipeline::canonical_order() {
    static const std::vector<IspStage> order = {IspStage::demosaic, IspStage::white_balance,
                                                IspStage::color_map, IspStage::gamma};
    return order;
}

void IspPipeline::validate_order(std::span<const IspStage> stages) {
    const auto& canonical = canonical_order();
    const bool ok = stages.size() == canonical.size() &&
                    std::equal(stages.begin(), stages.end(), canonical.begin());
    require(ok, "ISP stages must run demosaic, white_balance, color_map, gamma in order");
}

Image IspPipeline::run(const BayerImage& raw) const {
    Image rgb = demosaic(raw);
    rgb = white_balance(rgb, config_.wb_gains);
    rgb = color_map(rgb, config_.color_matrix);
    rgb = gamma_correct(rgb, config_.gamma);
    return rgb;
}

}  // namespace lbtk
