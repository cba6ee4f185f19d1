#include "lbtk/align.hpp"

#include "lbtk/fft2.hpp"
#include "lbtk/image_ops.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace lbtk {

double TranslationEstimate::magnitude() const { return std::hypot(dx, dy); }

namespace {

PlaneD to_gray(const Image& img) { return luminance(img).cast<double>(); }

void hann_window_inplace(PlaneD& p) {
    const int h = int(p.rows()), w = int(p.cols());
    Eigen::ArrayXd wy(h), wx(w);
    for (int y = 0; y < h; ++y)
        wy(y) = h == 1 ? 1.0 : 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * y / (h - 1)));
    for (int x = 0; x < w; ++x)
        wx(x) = w == 1 ? 1.0 : 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x / (w - 1)));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) p(y, x) *= wy(y) * wx(x);
}

double signed_index(int i, int n) { return i <= n / 2 ? double(i) : double(i) - n; }

/// Parabolic refinement around the peak using wrapped neighbors.
double parabola_offset(double rm, double r0, double rp) {
    const double denom = rm - 2.0 * r0 + rp;
    if (std::abs(denom) < 1e-30) return 0.0;
    const double off = 0.5 * (rm - rp) / denom;
    return std::clamp(off, -0.5, 0.5);
}

}  // namespace

TranslationEstimate phase_correlate(const PlaneD& a, const PlaneD& b, double min_variance) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            "phase correlation needs matching dimensions");
    const int h = int(a.rows()), w = int(a.cols());
    require(w >= 4 && h >= 4, "phase correlation needs at least 4x4 input");

    PlaneD wa = a - a.mean();
    PlaneD wb = b - b.mean();
    const double var_a = wa.square().mean();
    const double var_b = wb.square().mean();
    require(var_a > min_variance && var_b > min_variance, "no texture for correlation");
    hann_window_inplace(wa);
    hann_window_inplace(wb);

    const ComplexMat fa = fft2(wa);
    const ComplexMat fb = fft2(wb);
    ComplexMat cross(h, w);
    double peak_mag = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            cross(y, x) = fa(y, x) * std::conj(fb(y, x));
            peak_mag = std::max(peak_mag, std::abs(cross(y, x)));
        }
    // Regularized whitening: bins carrying no signal energy keep their
    // phase noise attenuated instead of amplified to unit magnitude.
    const double reg = 1e-3 * peak_mag + 1e-300;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) cross(y, x) /= std::abs(cross(y, x)) + reg;

    const PlaneD r = ifft2_real(cross);
    int px = 0, py = 0;
    double best = r(0, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (r(y, x) > best) {
                best = r(y, x);
                px = x;
                py = y;
            }

    const double offx = parabola_offset(r(py, (px - 1 + w) % w), r(py, px), r(py, (px + 1) % w));
    const double offy = parabola_offset(r((py - 1 + h) % h, px), r(py, px), r((py + 1) % h, px));

    // The correlation peak sits at minus the displacement of b relative to a.
    TranslationEstimate est;
    est.dx = -(signed_index(px, w) + offx);
    est.dy = -(signed_index(py, h) + offy);
    est.peak = std::clamp(best, 0.0, 1.0);
    return est;
}

namespace {

struct BlockGrid {
    std::vector<double> xs, ys;        // block centers
    PlaneD u, v, conf;                 // per-block estimates (rows=ys, cols=xs)
};

/// Bilinear lookup of a block-grid field at an arbitrary pixel position.
double grid_sample(const BlockGrid& g, const PlaneD& field, double x, double y) {
    const auto locate = [](const std::vector<double>& axis, double t, int& i0, double& f) {
        if (t <= axis.front()) {
            i0 = 0;
            f = 0.0;
            return;
        }
        if (t >= axis.back()) {
            i0 = int(axis.size()) - 2 >= 0 ? int(axis.size()) - 2 : 0;
            f = axis.size() >= 2 ? 1.0 : 0.0;
            return;
        }
        int lo = 0, hi = int(axis.size()) - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            (axis[mid] <= t ? lo : hi) = mid;
        }
        i0 = lo;
        f = (t - axis[lo]) / (axis[hi] - axis[lo]);
    };
    if (g.xs.size() == 1 && g.ys.size() == 1) return field(0, 0);
    int ix = 0, iy = 0;
    double fx = 0.0, fy = 0.0;
    locate(g.xs, x, ix, fx);
    locate(g.ys, y, iy, fy);
    const int ix1 = std::min<int>(ix + 1, int(g.xs.size()) - 1);
    const int iy1 = std::min<int>(iy + 1, int(g.ys.size()) - 1);
    return (1 - fy) * ((1 - fx) * field(iy, ix) + fx * field(iy, ix1)) +
           fy * ((1 - fx) * field(iy1, ix) + fx * field(iy1, ix1));
}

std::vector<double> grid_centers(int extent, int block, int stride) {
    std::vector<double> centers;
    if (extent <= block) {
        centers.push_back((extent - 1) / 2.0);
        return centers;
    }
    for (int o = 0; o + block <= extent; o += stride) centers.push_back(o + (block - 1) / 2.0);
    // Anchor the last block at the frame edge for full coverage.
    const double last = (extent - block) + (block - 1) / 2.0;
    if (centers.empty() || centers.back() < last - 1e-9) centers.push_back(last);
    return centers;
}

}  // namespace

FlowField estimate_flow(const Image& ref_a, const Image& ref_b, const FlowOptions& opts) {
    require(ref_a.same_dims(ref_b), "flow estimation needs matching dimensions");
    require(opts.levels >= 1 && opts.block_size >= 8 && opts.block_stride >= 1,
            "invalid flow options");

    const PlaneD gray_a = to_gray(ref_a);
    const PlaneD gray_b = to_gray(ref_b);

    // Grayscale pyramid, coarse last.
    std::vector<PlaneD> pyr_a{gray_a}, pyr_b{gray_b};
    for (int l = 1; l < opts.levels; ++l) {
        const PlaneD& pa = pyr_a.back();
        const PlaneD& pb = pyr_b.back();
        const int w = int(pa.cols()) / 2, h = int(pa.rows()) / 2;
        if (w < opts.block_size / 2 || h < opts.block_size / 2) break;
        PlaneD da(h, w), db(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                da(y, x) = 0.25 * (pa(2 * y, 2 * x) + pa(2 * y, 2 * x + 1) +
                                   pa(2 * y + 1, 2 * x) + pa(2 * y + 1, 2 * x + 1));
                db(y, x) = 0.25 * (pb(2 * y, 2 * x) + pb(2 * y, 2 * x + 1) +
                                   pb(2 * y + 1, 2 * x) + pb(2 * y + 1, 2 * x + 1));
            }
        pyr_a.push_back(std::move(da));
        pyr_b.push_back(std::move(db));
    }

    BlockGrid prev;
    bool have_prev = false;
    for (int level = int(pyr_a.size()) - 1; level >= 0; --level) {
        const PlaneD& pa = pyr_a[level];
        const PlaneD& pb = pyr_b[level];
        const int w = int(pa.cols()), h = int(pa.rows());
        const int block = std::min({opts.block_size, w, h});

        BlockGrid grid;
        grid.xs = grid_centers(w, block, opts.block_stride);
        grid.ys = grid_centers(h, block, opts.block_stride);
        const int nx = int(grid.xs.size()), ny = int(grid.ys.size());
        grid.u = PlaneD::Zero(ny, nx);
        grid.v = PlaneD::Zero(ny, nx);
        grid.conf = PlaneD::Zero(ny, nx);

        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double cx = grid.xs[i], cy = grid.ys[j];
                double pred_u = 0.0, pred_v = 0.0;
                if (have_prev) {
                    pred_u = 2.0 * grid_sample(prev, prev.u, cx / 2.0, cy / 2.0);
                    pred_v = 2.0 * grid_sample(prev, prev.v, cx / 2.0, cy / 2.0);
                }
                const int ox = int(std::lround(pred_u));
                const int oy = int(std::lround(pred_v));

                const int ax = std::clamp(int(std::lround(cx - (block - 1) / 2.0)), 0, w - block);
                const int ay = std::clamp(int(std::lround(cy - (block - 1) / 2.0)), 0, h - block);
                const int bx = std::clamp(ax + ox, 0, w - block);
                const int by = std::clamp(ay + oy, 0, h - block);

                const PlaneD block_a = pa.block(ay, ax, block, block);
                const PlaneD block_b = pb.block(by, bx, block, block);
                if (block_a.square().mean() - std::pow(block_a.mean(), 2) < opts.min_variance) {
                    grid.u(j, i) = pred_u;
                    grid.v(j, i) = pred_v;
                    grid.conf(j, i) = 0.0;
                    continue;
                }
                TranslationEstimate est;
                try {
                    est = phase_correlate(block_a, block_b, opts.min_variance);
                } catch (const Error&) {
                    grid.u(j, i) = pred_u;
                    grid.v(j, i) = pred_v;
                    grid.conf(j, i) = 0.0;
                    continue;
                }
                grid.u(j, i) = (bx - ax) + est.dx;
                grid.v(j, i) = (by - ay) + est.dy;
                grid.conf(j, i) = est.peak;
            }

        prev = std::move(grid);
        have_prev = true;
    }

    // Densify the finest block grid to per-pixel planes.
    const int w = ref_a.width(), h = ref_a.height();
    Plane u(h, w), v(h, w), conf(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fu = grid_sample(prev, prev.u, x, y);
            const double fv = grid_sample(prev, prev.v, x, y);
            u(y, x) = float(std::clamp(fu, -opts.max_flow, opts.max_flow));
            v(y, x) = float(std::clamp(fv, -opts.max_flow, opts.max_flow));
            conf(y, x) = float(std::clamp(grid_sample(prev, prev.conf, x, y), 0.0, 1.0));
        }
    return FlowField(std::move(u), std::move(v), std::move(conf));
}

WarpResult warp(const Image& img, const FlowField& flow) {
    require(img.width() == flow.width() && img.height() == flow.height(),
            "warp needs matching flow dimensions");
    require(flow.u_plane().allFinite() && flow.v_plane().allFinite(), "flow must be finite");

    WarpResult out;
    out.image = Image(img.width(), img.height(), img.channels());
    Plane valid = Plane::Ones(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double sx = x + flow.u(x, y);
            const double sy = y + flow.v(x, y);
            bool inside = true;
            for (int c = 0; c < img.channels(); ++c) {
                float val;
                inside = bilinear_sample(img.plane(c), sx, sy, val);
                out.image.at(x, y, c) = val;
            }
            if (!inside) valid(y, x) = 0.0f;
        }
    out.valid = BlurMask(std::move(valid));
    return out;
}

double geometric_error(const Image& a, const Image& b) {
    require(a.same_dims(b), "geometric error needs matching dimensions");
    PlaneD ga = to_gray(a), gb = to_gray(b);

    // Trim to FFT-friendly dimensions around the center.
    const int w = fft_friendly_size(int(ga.cols()));
    const int h = fft_friendly_size(int(ga.rows()));
    const int x0 = (int(ga.cols()) - w) / 2, y0 = (int(ga.rows()) - h) / 2;
    const PlaneD ca = ga.block(y0, x0, h, w);
    const PlaneD cb = gb.block(y0, x0, h, w);

    return phase_correlate(ca, cb).magnitude();
}

}  // namespace lbtk
