#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lbtk {

/// Error type for the whole toolkit. The kind distinguishes malformed
/// requests (usage) from malformed or inconsistent inputs (data) so the CLI
/// can map them to distinct exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { usage, data };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
    throw Error(Error::Kind::data, what);
}

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(what);
}

template <typename Scalar>
using PlaneT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Plane = PlaneT<float>;
using PlaneD = PlaneT<double>;

/// Integer pixel rectangle, half-open in both axes.
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool empty() const { return width <= 0 || height <= 0; }
    std::int64_t area() const { return empty() ? 0 : std::int64_t(width) * height; }

    bool contains(int px, int py) const {
        return px >= x && px < x + width && py >= y && py < y + height;
    }

    Rect intersect(const Rect& o) const {
        const int x0 = std::max(x, o.x);
        const int y0 = std::max(y, o.y);
        const int x1 = std::min(x + width, o.x + o.width);
        const int y1 = std::min(y + height, o.y + o.height);
        return Rect{x0, y0, x1 - x0, y1 - y0};
    }

    bool operator==(const Rect&) const = default;
};

/// Planar raster of intensities, nominal range [0,1], 1/3/4 channels.
/// Each channel is a dense row-major Eigen array so callers can apply
/// Eigen expressions to planes directly. All toolkit operations treat
/// images as immutable values and return new ones.
template <typename Scalar>
class ImageT {
public:
    ImageT() = default;

    ImageT(int width, int height, int channels, Scalar fill = Scalar(0)) {
        require(width > 0 && height > 0, "image dimensions must be positive");
        require(channels == 1 || channels == 3 || channels == 4,
                "channel count must be 1, 3 or 4");
        width_ = width;
        height_ = height;
        planes_.assign(static_cast<size_t>(channels),
                       PlaneT<Scalar>::Constant(height, width, fill));
    }

    static ImageT from_planes(std::vector<PlaneT<Scalar>> planes) {
        require(!planes.empty(), "image needs at least one plane");
        ImageT img;
        img.width_ = static_cast<int>(planes[0].cols());
        img.height_ = static_cast<int>(planes[0].rows());
        require(img.width_ > 0 && img.height_ > 0, "image dimensions must be positive");
        const size_t n = planes.size();
        require(n == 1 || n == 3 || n == 4, "channel count must be 1, 3 or 4");
        for (const auto& p : planes)
            require(p.rows() == img.height_ && p.cols() == img.width_,
                    "all planes must share dimensions");
        img.planes_ = std::move(planes);
        return img;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return static_cast<int>(planes_.size()); }
    bool empty() const { return planes_.empty(); }
    std::int64_t pixel_count() const { return std::int64_t(width_) * height_; }

    Rect frame() const { return Rect{0, 0, width_, height_}; }

    Scalar at(int x, int y, int c) const { return planes_[c](y, x); }
    Scalar& at(int x, int y, int c) { return planes_[c](y, x); }

    const PlaneT<Scalar>& plane(int c) const { return planes_[c]; }
    PlaneT<Scalar>& plane(int c) { return planes_[c]; }

    bool same_dims(const ImageT& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels() == o.channels();
    }

    bool all_finite() const {
        for (const auto& p : planes_)
            if (!p.allFinite()) return false;
        return true;
    }

    template <typename T>
    ImageT<T> cast() const {
        std::vector<PlaneT<T>> out;
        out.reserve(planes_.size());
        for (const auto& p : planes_) out.push_back(p.template cast<T>());
        return ImageT<T>::from_planes(std::move(out));
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<PlaneT<Scalar>> planes_;
};

using Image = ImageT<float>;
using ImageD = ImageT<double>;

/// Per-pixel blur-likelihood map. Values are kept in [0,1]; a "binary"
/// mask contains only 0 and 1.
class BlurMask {
public:
    BlurMask() = default;

    BlurMask(int width, int height, float fill = 0.0f) {
        require(width > 0 && height > 0, "mask dimensions must be positive");
        require(fill >= 0.0f && fill <= 1.0f, "mask fill must lie in [0,1]");
        values_ = Plane::Constant(height, width, fill);
    }

    /// Takes ownership of a plane, clamping values into [0,1].
    explicit BlurMask(Plane values) : values_(std::move(values)) {
        values_ = values_.max(0.0f).min(1.0f);
    }

    int width() const { return static_cast<int>(values_.cols()); }
    int height() const { return static_cast<int>(values_.rows()); }
    bool empty() const { return values_.size() == 0; }

    float at(int x, int y) const { return values_(y, x); }
    void set(int x, int y, float v) { values_(y, x) = std::min(std::max(v, 0.0f), 1.0f); }

    const Plane& values() const { return values_; }

    bool is_binary() const {
        return ((values_ == 0.0f) || (values_ == 1.0f)).all();
    }

    /// Sum of mask values (pixel count for binary masks).
    double area() const { return values_.template cast<double>().sum(); }

    double area_fraction() const {
        return values_.size() == 0 ? 0.0 : area() / double(values_.size());
    }

private:
    Plane values_;
};

enum class BayerPattern { RGGB, BGGR, GRBG, GBRG };

const char* bayer_pattern_name(BayerPattern p);
BayerPattern bayer_pattern_from_name(const std::string& name);

/// Color channel (0=R, 1=G, 2=B) sampled at a mosaic site.
inline int bayer_channel(BayerPattern p, int x, int y) {
    // Channel layout of the top-left 2x2 cell, row-major.
    static constexpr int kCell[4][4] = {
        {0, 1, 1, 2},  // RGGB
        {2, 1, 1, 0},  // BGGR
        {1, 0, 2, 1},  // GRBG
        {1, 2, 0, 1},  // GBRG
    };
    return kCell[static_cast<int>(p)][(y & 1) * 2 + (x & 1)];
}

/// Single-plane mosaic of linear normalized intensities in [0,1].
class BayerImage {
public:
    BayerImage() = default;

    BayerImage(int width, int height, BayerPattern pattern, float fill = 0.0f)
        : pattern_(pattern) {
        require(width > 0 && height > 0, "mosaic dimensions must be positive");
        require(width % 2 == 0 && height % 2 == 0, "mosaic dimensions must be even");
        data_ = Plane::Constant(height, width, fill);
    }

    BayerImage(Plane data, BayerPattern pattern) : data_(std::move(data)), pattern_(pattern) {
        require(data_.cols() > 0 && data_.rows() > 0, "mosaic dimensions must be positive");
        require(data_.cols() % 2 == 0 && data_.rows() % 2 == 0, "mosaic dimensions must be even");
    }

    int width() const { return static_cast<int>(data_.cols()); }
    int height() const { return static_cast<int>(data_.rows()); }
    BayerPattern pattern() const { return pattern_; }

    float at(int x, int y) const { return data_(y, x); }
    float& at(int x, int y) { return data_(y, x); }

    int channel_at(int x, int y) const { return bayer_channel(pattern_, x, y); }

    const Plane& data() const { return data_; }
    Plane& data() { return data_; }

private:
    Plane data_;
    BayerPattern pattern_ = BayerPattern::RGGB;
};

/// Dense per-pixel displacement field in pixels, with a per-pixel
/// confidence in [0,1] (0 marks blocks where estimation had no texture).
class FlowField {
public:
    FlowField() = default;

    FlowField(int width, int height) {
        require(width > 0 && height > 0, "flow dimensions must be positive");
        u_ = Plane::Zero(height, width);
        v_ = Plane::Zero(height, width);
        confidence_ = Plane::Ones(height, width);
    }

    FlowField(Plane u, Plane v, Plane confidence)
        : u_(std::move(u)), v_(std::move(v)), confidence_(std::move(confidence)) {
        require(u_.rows() == v_.rows() && u_.cols() == v_.cols() &&
                    u_.rows() == confidence_.rows() && u_.cols() == confidence_.cols(),
                "flow planes must share dimensions");
    }

    int width() const { return static_cast<int>(u_.cols()); }
    int height() const { return static_cast<int>(u_.rows()); }

    float u(int x, int y) const { return u_(y, x); }
    float v(int x, int y) const { return v_(y, x); }
    float confidence(int x, int y) const { return confidence_(y, x); }

    const Plane& u_plane() const { return u_; }
    const Plane& v_plane() const { return v_; }
    const Plane& confidence_plane() const { return confidence_; }

    float max_magnitude() const {
        if (u_.size() == 0) return 0.0f;
        return (u_.square() + v_.square()).sqrt().maxCoeff();
    }

private:
    Plane u_, v_, confidence_;
};

}  // namespace lbtk
