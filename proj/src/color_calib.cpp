#include "lbtk/color_calib.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>

namespace lbtk {

using json = nlohmann::ordered_json;

std::array<double, kColorBasisTerms> color_basis_row(double nx, double ny) {
    return {nx * nx * nx, nx * nx * ny, nx * ny * ny, ny * ny * ny,
            nx * nx,      nx * ny,      ny * ny,      nx,
            ny,           1.0};
}

double ColorCalibration::gain(int channel, double x, double y) const {
    const auto row = color_basis_row(normalized_x(x), normalized_y(y));
    double g = 0.0;
    for (int i = 0; i < kColorBasisTerms; ++i) g += constants_[channel][i] * row[i];
    return g;
}

PlaneD ColorCalibration::gain_plane(int channel) const {
    PlaneD p(frame_height_, frame_width_);
    for (int y = 0; y < frame_height_; ++y)
        for (int x = 0; x < frame_width_; ++x) p(y, x) = gain(channel, x, y);
    return p;
}

std::string ColorCalibration::to_json_string() const {
    json j;
    j["schema_version"] = 1;
    j["kind"] = "color_calibration";
    j["frame_width"] = frame_width_;
    j["frame_height"] = frame_height_;
    j["coordinate_convention"] = "pixel centers normalized to [-1,1], nx = 2(x+0.5)/W - 1";
    j["basis"] = "x3 x2y xy2 y3 x2 xy y2 x y 1";
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) j["constants"][names[c]] = constants_[c];
    j["residual_rms"] = residual_rms;
    j["patch_size"] = patch_size;
    j["patch_centers"] = patch_centers;
    return j.dump(2);
}

ColorCalibration ColorCalibration::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("malformed calibration JSON: ") + e.what());
    }
    require(j.value("kind", "") == "color_calibration", "not a color calibration record");
    std::array<std::array<double, kColorBasisTerms>, 3> k{};
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) {
        const auto& row = j.at("constants").at(names[c]);
        require(row.size() == kColorBasisTerms, "calibration needs 10 constants per channel");
        for (int i = 0; i < kColorBasisTerms; ++i) k[c][i] = row[i].get<double>();
    }
    ColorCalibration calib(k, j.at("frame_width").get<int>(), j.at("frame_height").get<int>());
    if (j.contains("residual_rms")) {
        const auto& r = j["residual_rms"];
        for (int c = 0; c < 3 && c < int(r.size()); ++c) calib.residual_rms[c] = r[c];
    }
    calib.patch_size = j.value("patch_size", 0);
    if (j.contains("patch_centers"))
        for (const auto& pc : j["patch_centers"])
            calib.patch_centers.push_back({pc[0].get<double>(), pc[1].get<double>()});
    return calib;
}

void ColorCalibration::save(const std::string& path) const {
    std::ofstream f(path);
    require(f.good(), "cannot open calibration file for writing: " + path);
    f << to_json_string() << "\n";
}

ColorCalibration ColorCalibration::load(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open calibration file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_string(ss.str());
}

ColorCalibration fit_color_constants(const std::vector<std::array<double, 3>>& patch_means,
                                     const std::vector<std::array<double, 2>>& centers,
                                     int target_index, int frame_width, int frame_height,
                                     int patch_size) {
    const int k = static_cast<int>(patch_means.size());
    require(k == static_cast<int>(centers.size()), "patch means and centers disagree");
    require(k >= kColorBasisTerms, "need at least 10 patches to fit the cubic basis");
    require(target_index >= 0 && target_index < k, "target patch index out of range");
    for (int c = 0; c < 3; ++c)
        require(patch_means[target_index][c] > 0.0, "target patch mean must be positive");

    ColorCalibration calib = ColorCalibration::identity(frame_width, frame_height);

    Eigen::MatrixXd design(k, kColorBasisTerms);
    for (int i = 0; i < k; ++i) {
        const auto row =
            color_basis_row(calib.normalized_x(centers[i][0]), calib.normalized_y(centers[i][1]));
        for (int j = 0; j < kColorBasisTerms; ++j) design(i, j) = row[j];
    }

    std::array<std::array<double, kColorBasisTerms>, 3> constants{};
    std::array<double, 3> rms{};
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd alpha(k);
        for (int i = 0; i < k; ++i) {
            require(patch_means[i][c] > 0.0, "patch mean must be positive for every channel");
            alpha(i) = patch_means[target_index][c] / patch_means[i][c];
        }

        // Normal equations first; orthogonal factorization when conditioning
        // or rank is suspect.
        const Eigen::MatrixXd gram = design.transpose() * design;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        Eigen::VectorXd coeffs;
        if (lo > 0.0 && hi / lo < 1e12) {
            coeffs = gram.ldlt().solve(design.transpose() * alpha);
        } else {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
            qr.setThreshold(1e-10);
            require(qr.rank() == kColorBasisTerms, "degenerate patch layout");
            coeffs = qr.solve(alpha);
        }
        for (int j = 0; j < kColorBasisTerms; ++j) constants[c][j] = coeffs(j);
        rms[c] = std::sqrt((design * coeffs - alpha).squaredNorm() / k);
    }

    ColorCalibration out(constants, frame_width, frame_height);
    out.residual_rms = rms;
    out.patch_centers = centers;
    out.patch_size = patch_size;
    return out;
}

namespace {

PatchGrid patch_grid_layout(int width, int height, int grid_cols, int grid_rows) {
    require(grid_cols >= 1 && grid_rows >= 1, "patch grid must be positive");
    PatchGrid grid;
    grid.patch_size = std::min(width / grid_cols, height / grid_rows);
    require(grid.patch_size >= 2, "frame too small for the requested patch grid");
    double best = 1e30;
    for (int gy = 0; gy < grid_rows; ++gy)
        for (int gx = 0; gx < grid_cols; ++gx) {
            const double cx = (gx + 0.5) * double(width) / grid_cols;
            const double cy = (gy + 0.5) * double(height) / grid_rows;
            grid.centers.push_back({cx, cy});
            const double d = std::hypot(cx - width / 2.0, cy - height / 2.0);
            if (d < best) {
                best = d;
                grid.central_index = static_cast<int>(grid.centers.size()) - 1;
            }
        }
    return grid;
}

}  // namespace

PatchGrid measure_patch_grid(const Image& img, int grid_cols, int grid_rows) {
    require(img.channels() == 3, "patch measurement expects a 3-channel image");
    PatchGrid grid = patch_grid_layout(img.width(), img.height(), grid_cols, grid_rows);
    const int half = grid.patch_size / 2;
    for (const auto& ctr : grid.centers) {
        const int x0 = std::clamp(int(ctr[0]) - half, 0, img.width() - grid.patch_size);
        const int y0 = std::clamp(int(ctr[1]) - half, 0, img.height() - grid.patch_size);
        std::array<double, 3> mean{};
        for (int c = 0; c < 3; ++c)
            mean[c] = img.plane(c)
                          .block(y0, x0, grid.patch_size, grid.patch_size)
                          .cast<double>()
                          .mean();
        grid.means.push_back(mean);
    }
    return grid;
}

PatchGrid measure_patch_grid(const BayerImage& raw, int grid_cols, int grid_rows) {
    PatchGrid grid = patch_grid_layout(raw.width(), raw.height(), grid_cols, grid_rows);
    const int half = grid.patch_size / 2;
    for (const auto& ctr : grid.centers) {
        const int x0 = std::clamp(int(ctr[0]) - half, 0, raw.width() - grid.patch_size);
        const int y0 = std::clamp(int(ctr[1]) - half, 0, raw.height() - grid.patch_size);
        std::array<double, 3> sum{};
        std::array<std::int64_t, 3> count{};
        for (int y = y0; y < y0 + grid.patch_size; ++y)
            for (int x = x0; x < x0 + grid.patch_size; ++x) {
                const int c = raw.channel_at(x, y);
                sum[c] += raw.at(x, y);
                ++count[c];
            }
        std::array<double, 3> mean{};
        for (int c = 0; c < 3; ++c) {
            require(count[c] > 0, "patch misses a Bayer channel");
            mean[c] = sum[c] / double(count[c]);
        }
        grid.means.push_back(mean);
    }
    return grid;
}

Image color_correct(const Image& img, const ColorCalibration& calib) {
    require(img.channels() == 3, "color correction expects a 3-channel image");
    Image out(img.width(), img.height(), 3);
    for (int c = 0; c < 3; ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.plane(c);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                const double a = calib.gain(c, x, y);
                require(a > 0.0, "color gain must be positive over the frame");
                dst(y, x) = float(a * src(y, x));
            }
    }
    return out;
}

BayerImage color_correct(const BayerImage& raw, const ColorCalibration& calib) {
    BayerImage out(raw.width(), raw.height(), raw.pattern());
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) {
            const double a = calib.gain(raw.channel_at(x, y), x, y);
            require(a > 0.0, "color gain must be positive over the frame");
            out.at(x, y) = float(a * raw.at(x, y));
        }
    return out;
}

namespace {

std::array<double, 3> channel_means(const Image& img) {
    require(img.channels() == 3, "photometric alignment expects 3 channels");
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) m[c] = img.plane(c).cast<double>().mean();
    return m;
}

std::array<double, 3> channel_means(const BayerImage& raw) {
    std::array<double, 3> sum{};
    std::array<std::int64_t, 3> count{};
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) {
            sum[raw.channel_at(x, y)] += raw.at(x, y);
            ++count[raw.channel_at(x, y)];
        }
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) m[c] = count[c] > 0 ? sum[c] / double(count[c]) : 0.0;
    return m;
}

PhotometricGain gain_from_means(const std::array<double, 3>& blur,
                                const std::array<double, 3>& sharp) {
    PhotometricGain g;
    for (int c = 0; c < 3; ++c) {
        require(blur[c] > 0.0, "blurred channel mean must be positive");
        g.beta[c] = sharp[c] / blur[c];
    }
    return g;
}

}  // namespace

PhotometricGain photometric_gain(const Image& blur, const Image& sharp) {
    require(blur.same_dims(sharp), "photometric alignment needs matching dimensions");
    return gain_from_means(channel_means(blur), channel_means(sharp));
}

PhotometricGain photometric_gain(const BayerImage& blur, const BayerImage& sharp) {
    require(blur.width() == sharp.width() && blur.height() == sharp.height(),
            "photometric alignment needs matching dimensions");
    return gain_from_means(channel_means(blur), channel_means(sharp));
}

Image apply_gain(const Image& img, const PhotometricGain& gain) {
    require(img.channels() == 3, "photometric alignment expects 3 channels");
    Image out(img.width(), img.height(), 3);
    for (int c = 0; c < 3; ++c) out.plane(c) = img.plane(c) * float(gain.beta[c]);
    return out;
}

BayerImage apply_gain(const BayerImage& raw, const PhotometricGain& gain) {
    BayerImage out(raw.width(), raw.height(), raw.pattern());
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x)
            out.at(x, y) = float(raw.at(x, y) * gain.beta[raw.channel_at(x, y)]);
    return out;
}

double delta_L(const Image& a, const Image& b) {
    require(a.same_dims(b), "delta_L needs matching dimensions");
    double num = 0.0, den = 0.0;
    const int ch = a.channels();
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            double la = 0.0, lb = 0.0;
            for (int c = 0; c < ch; ++c) {
                la += a.at(x, y, c);
                lb += b.at(x, y, c);
            }
            num += std::abs(la - lb) / ch;
            den += lb / ch;
        }
    require(den > 0.0, "delta_L reference image is all zero");
    return num / den;
}

}  // namespace lbtk
