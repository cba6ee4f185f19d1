#include "lbtk/image_ops.hpp"

namespace lbtk {

namespace {

Plane morph_pass(const Plane& src, int r, bool dilating) {
    const int w = static_cast<int>(src.cols()), h = static_cast<int>(src.rows());
    Plane tmp(h, w), out(h, w);
    // Separable min/max over the square element; out-of-frame counts as 0.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float v = dilating ? 0.0f : 1.0f;
            for (int d = -r; d <= r; ++d) {
                const int xs = x + d;
                const float s = (xs < 0 || xs >= w) ? 0.0f : src(y, xs);
                v = dilating ? std::max(v, s) : std::min(v, s);
            }
            tmp(y, x) = v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float v = dilating ? 0.0f : 1.0f;
            for (int d = -r; d <= r; ++d) {
                const int ys = y + d;
                const float s = (ys < 0 || ys >= h) ? 0.0f : tmp(ys, x);
                v = dilating ? std::max(v, s) : std::min(v, s);
            }
            out(y, x) = v;
        }
    return out;
}

}  // namespace

BlurMask dilate(const BlurMask& m, int size, int iterations) {
    require(size >= 1 && size % 2 == 1, "structuring element size must be odd");
    Plane p = m.values();
    p = (p >= 0.5f).cast<float>();
    for (int i = 0; i < iterations; ++i) p = morph_pass(p, size / 2, true);
    return BlurMask(std::move(p));
}

BlurMask erode(const BlurMask& m, int size, int iterations) {
    require(size >= 1 && size % 2 == 1, "structuring element size must be odd");
    Plane p = m.values();
    p = (p >= 0.5f).cast<float>();
    for (int i = 0; i < iterations; ++i) p = morph_pass(p, size / 2, false);
    return BlurMask(std::move(p));
}

}  // namespace lbtk
