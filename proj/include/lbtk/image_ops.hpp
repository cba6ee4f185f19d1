#pragma once

#include "lbtk/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lbtk {

/// Result of an integer translation: the translated raster plus the
/// rectangle (in output coordinates) on which the translated values are
/// real data. Pixels outside the overlap are edge extensions kept only to
/// preserve the frame size; consumers must restrict themselves to the rect.
template <typename Scalar>
struct ShiftResultT {
    ImageT<Scalar> image;
    Rect overlap;
};

using ShiftResult = ShiftResultT<float>;

template <typename Scalar>
Rect shift_overlap(int width, int height, int k, int l) {
    return Rect{std::max(0, k), std::max(0, l), width - std::abs(k), height - std::abs(l)};
}

/// Translates an image by (k, l) pixels: out(x, y) = in(x - k, y - l).
/// Source coordinates are clamped at the frame edge so the output stays
/// finite everywhere, and the reported overlap marks the exactly
/// translated region.
template <typename Scalar>
ShiftResultT<Scalar> shift(const ImageT<Scalar>& img, int k, int l) {
    const int w = img.width(), h = img.height();
    require(std::abs(k) <= w && std::abs(l) <= h, "shift exceeds image dimensions");
    const Rect overlap = shift_overlap<Scalar>(w, h, k, l);
    require(!overlap.empty(), "degenerate shift: empty overlap");

    ImageT<Scalar> out(w, h, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            const int sy = std::clamp(y - l, 0, h - 1);
            for (int x = 0; x < w; ++x) {
                const int sx = std::clamp(x - k, 0, w - 1);
                dst(y, x) = src(sy, sx);
            }
        }
    }
    return {std::move(out), overlap};
}

template <typename Scalar>
ImageT<Scalar> crop(const ImageT<Scalar>& img, const Rect& r) {
    require(!r.empty(), "empty crop rectangle");
    require(r.x >= 0 && r.y >= 0 && r.x + r.width <= img.width() &&
                r.y + r.height <= img.height(),
            "crop rectangle outside image");
    std::vector<PlaneT<Scalar>> planes;
    planes.reserve(img.channels());
    for (int c = 0; c < img.channels(); ++c)
        planes.push_back(img.plane(c).block(r.y, r.x, r.height, r.width));
    return ImageT<Scalar>::from_planes(std::move(planes));
}

inline BlurMask crop(const BlurMask& m, const Rect& r) {
    require(!r.empty() && r.x >= 0 && r.y >= 0 && r.x + r.width <= m.width() &&
                r.y + r.height <= m.height(),
            "crop rectangle outside mask");
    return BlurMask(Plane(m.values().block(r.y, r.x, r.height, r.width)));
}

/// 2x2 box average; output dimensions are floor(input/2). Odd trailing
/// rows/columns are dropped.
template <typename Scalar>
ImageT<Scalar> downsample2(const ImageT<Scalar>& img) {
    const int w = img.width() / 2, h = img.height() / 2;
    require(w >= 1 && h >= 1, "image too small to downsample");
    ImageT<Scalar> out(w, h, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dst(y, x) = (src(2 * y, 2 * x) + src(2 * y, 2 * x + 1) +
                             src(2 * y + 1, 2 * x) + src(2 * y + 1, 2 * x + 1)) /
                            Scalar(4);
    }
    return out;
}

/// Multi-scale pyramid: level 0 is the input, each further level a 2x2
/// box downsample of the previous.
template <typename Scalar>
std::vector<ImageT<Scalar>> build_pyramid(const ImageT<Scalar>& img, int levels) {
    require(levels >= 1, "pyramid needs at least one level");
    std::vector<ImageT<Scalar>> pyr;
    pyr.push_back(img);
    for (int k = 1; k < levels; ++k) pyr.push_back(downsample2(pyr.back()));
    return pyr;
}

template <typename Scalar>
ImageT<Scalar> flip_horizontal(const ImageT<Scalar>& img) {
    std::vector<PlaneT<Scalar>> planes;
    for (int c = 0; c < img.channels(); ++c)
        planes.push_back(img.plane(c).rowwise().reverse());
    return ImageT<Scalar>::from_planes(std::move(planes));
}

template <typename Scalar>
ImageT<Scalar> flip_vertical(const ImageT<Scalar>& img) {
    std::vector<PlaneT<Scalar>> planes;
    for (int c = 0; c < img.channels(); ++c)
        planes.push_back(img.plane(c).colwise().reverse());
    return ImageT<Scalar>::from_planes(std::move(planes));
}

/// Per-pixel channel mean.
template <typename Scalar>
PlaneT<Scalar> luminance(const ImageT<Scalar>& img) {
    PlaneT<Scalar> acc = img.plane(0);
    for (int c = 1; c < img.channels(); ++c) acc += img.plane(c);
    return acc / Scalar(img.channels());
}

template <typename Scalar>
double global_mean(const ImageT<Scalar>& img) {
    double s = 0.0;
    for (int c = 0; c < img.channels(); ++c) s += img.plane(c).template cast<double>().sum();
    return s / (double(img.pixel_count()) * img.channels());
}

/// Mirror index with edge repetition: -1 -> 0, n -> n-1.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

/// Bilinear sample with edge clamping. Returns false when (sx, sy) falls
/// outside the valid sampling domain [0, w-1] x [0, h-1].
template <typename Scalar>
bool bilinear_sample(const PlaneT<Scalar>& p, double sx, double sy, Scalar& out) {
    const int w = static_cast<int>(p.cols()), h = static_cast<int>(p.rows());
    const bool inside = sx >= 0.0 && sy >= 0.0 && sx <= w - 1.0 && sy <= h - 1.0;
    const double cx = std::clamp(sx, 0.0, double(w - 1));
    const double cy = std::clamp(sy, 0.0, double(h - 1));
    const int x0 = std::min(int(cx), w - 2 >= 0 ? w - 2 : 0);
    const int y0 = std::min(int(cy), h - 2 >= 0 ? h - 2 : 0);
    const double fx = cx - x0, fy = cy - y0;
    const double v00 = p(y0, x0), v01 = p(y0, std::min(x0 + 1, w - 1));
    const double v10 = p(std::min(y0 + 1, h - 1), x0);
    const double v11 = p(std::min(y0 + 1, h - 1), std::min(x0 + 1, w - 1));
    out = Scalar((1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11));
    return inside;
}

/// Normalized box filter of odd size, mirrored borders.
template <typename Scalar>
PlaneT<Scalar> box_filter(const PlaneT<Scalar>& p, int size) {
    require(size >= 1 && size % 2 == 1, "box filter size must be odd");
    const int r = size / 2;
    const int w = static_cast<int>(p.cols()), h = static_cast<int>(p.rows());
    PlaneT<Scalar> tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d) s += p(y, reflect_index(x + d, w));
            tmp(y, x) = Scalar(s / size);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d) s += tmp(reflect_index(y + d, h), x);
            out(y, x) = Scalar(s / size);
        }
    return out;
}

/// Binary dilation with a square structuring element. Pixels outside the
/// frame are treated as 0.
BlurMask dilate(const BlurMask& m, int size, int iterations = 1);

/// Binary erosion with a square structuring element. Pixels outside the
/// frame are treated as 0, so erosion shrinks masks touching the border.
BlurMask erode(const BlurMask& m, int size, int iterations = 1);

}  // namespace lbtk
