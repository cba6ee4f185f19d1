// Acceptance suite: one test case per release criterion, each printing a
// single PASS/FAIL line. Tolerances are pinned here, not configurable.

#include "lbtk/align.hpp"
#include "lbtk/bgsub.hpp"
#include "lbtk/capture.hpp"
#include "lbtk/color_calib.hpp"
#include "lbtk/image_io.hpp"
#include "lbtk/image_ops.hpp"
#include "lbtk/losses.hpp"
#include "lbtk/manifest.hpp"
#include "lbtk/metrics.hpp"
#include "lbtk/sampler.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace lbtk;

namespace {

#ifndef LBTK_BIN_DEFAULT
#define LBTK_BIN_DEFAULT "lbtk"
#endif

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void verdict(int criterion, bool pass, const std::string& detail) {
    std::cout << "[criterion " << criterion << "] " << (pass ? "PASS" : "FAIL") << " — "
              << detail << "\n";
    REQUIRE(pass);
}

/// Random cubic gain field with values inside [0.5, 2] over the frame,
/// normalized to exactly 1 at the target patch center.
ColorCalibration bounded_cast_field(int w, int h, std::uint32_t seed,
                                    const std::array<double, 2>& target_center) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coeff(-0.06, 0.06);
    while (true) {
        std::array<std::array<double, kColorBasisTerms>, 3> k{};
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i + 1 < kColorBasisTerms; ++i) k[c][i] = coeff(rng);
            k[c][kColorBasisTerms - 1] = 1.0;
        }
        ColorCalibration calib(k, w, h);
        for (int c = 0; c < 3; ++c) {
            const double at_target = calib.gain(c, target_center[0], target_center[1]);
            for (int i = 0; i < kColorBasisTerms; ++i) k[c][i] /= at_target;
        }
        const ColorCalibration normalized(k, w, h);
        double lo = 1e30, hi = -1e30;
        for (int c = 0; c < 3; ++c) {
            const PlaneD g = normalized.gain_plane(c);
            lo = std::min(lo, g.minCoeff());
            hi = std::max(hi, g.maxCoeff());
        }
        if (lo >= 0.5 && hi <= 2.0) return normalized;
    }
}

/// Simulator scene for mask generation, matching the capture protocol:
/// static pair, target pair, update pairs at later object positions.
struct MaskScene {
    SceneFrames frames;
    BlurMask gt_mask;
};

MaskScene mask_scene(std::uint32_t seed, bool disc) {
    const int width = 192, height = 144, pairs = 8, exposure_frames = 10;
    std::mt19937 rng(seed);
    const Image bg = oracle::textured_image(width, height, seed, 24, 0.2);

    const int side = 28;
    MotionScript script;
    script.background = bg;
    script.sprite = Image(side, side, 3, 0.0f);
    script.sprite_alpha = Plane::Zero(side, side);
    std::uniform_real_distribution<float> bright(0.75f, 1.0f);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const bool inside =
                !disc || std::hypot(x - (side - 1) / 2.0, y - (side - 1) / 2.0) <= side / 2.0;
            if (!inside) continue;
            script.sprite_alpha(y, x) = 1.0f;
            script.sprite.at(x, y, 0) = bright(rng);
            script.sprite.at(x, y, 1) = bright(rng) * 0.9f;
            script.sprite.at(x, y, 2) = bright(rng) * 0.8f;
        }

    const double y0 = (height - side) / 2.0;
    const double travel = 12.0;
    const double spacing = double(width - side - 20) / pairs;
    const auto capture_at = [&](double x0) {
        script.transforms.clear();
        for (int f = 0; f < exposure_frames; ++f)
            script.transforms.push_back({x0 + travel * f / (exposure_frames - 1), y0, 0.0});
        return simulate_pair(script);
    };

    MaskScene out;
    out.frames.sharp_static = bg;
    out.frames.blur_static = bg;
    const SimulatedPair target = capture_at(10.0 + spacing);
    out.frames.sharp_target = target.sharp;
    out.frames.blur_target = target.blurred;
    out.gt_mask = target.gt_mask;
    for (int k = 2; k < pairs; ++k) {
        const SimulatedPair p = capture_at(10.0 + spacing * k);
        out.frames.other_pairs.emplace_back(p.sharp, p.blurred);
    }
    return out;
}

/// Summed-area table for O(1) patch containment queries.
struct MaskIntegral {
    explicit MaskIntegral(const BlurMask& mask)
        : w(mask.width()), h(mask.height()), sums((w + 1) * (h + 1), 0) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                sums[(y + 1) * (w + 1) + (x + 1)] = sums[y * (w + 1) + (x + 1)] +
                                                    sums[(y + 1) * (w + 1) + x] -
                                                    sums[y * (w + 1) + x] +
                                                    (mask.at(x, y) > 0.5f ? 1 : 0);
    }
    bool any(int x0, int y0, int size) const {
        const int x1 = std::min(x0 + size, w), y1 = std::min(y0 + size, h);
        return sums[y1 * (w + 1) + x1] - sums[y0 * (w + 1) + x1] - sums[y1 * (w + 1) + x0] +
                   sums[y0 * (w + 1) + x0] >
               0;
    }
    int w, h;
    std::vector<std::int64_t> sums;
};

std::string cli_binary() {
    if (const char* env = std::getenv("LBTK_BIN")) return env;
    return LBTK_BIN_DEFAULT;
}

}  // namespace

TEST_SUITE("acceptance") {

TEST_CASE("criterion 1: color round trip") {
    const auto t0 = std::chrono::steady_clock::now();
    const int w = 512, h = 512;

    // 10x8 synthetic patch grid with the target at its central cell.
    std::vector<std::array<double, 2>> centers;
    for (int gy = 0; gy < 8; ++gy)
        for (int gx = 0; gx < 10; ++gx)
            centers.push_back({(gx + 0.5) * w / 10.0, (gy + 0.5) * h / 8.0});
    const int target = 4 * 10 + 5;
    const ColorCalibration truth = bounded_cast_field(w, h, 3001, centers[target]);

    std::vector<std::array<double, 3>> means;
    for (const auto& ctr : centers) {
        std::array<double, 3> m{};
        for (int c = 0; c < 3; ++c) m[c] = 0.7 / truth.gain(c, ctr[0], ctr[1]);
        means.push_back(m);
    }
    const ColorCalibration fitted = fit_color_constants(means, centers, target, w, h);

    double rel_err = 0.0;
    for (int c = 0; c < 3; ++c) {
        double max_gt = 0.0, max_err = 0.0;
        for (int i = 0; i < kColorBasisTerms; ++i) {
            max_gt = std::max(max_gt, std::abs(truth.constants()[c][i]));
            max_err =
                std::max(max_err, std::abs(truth.constants()[c][i] - fitted.constants()[c][i]));
        }
        rel_err = std::max(rel_err, max_err / max_gt);
    }

    const Image frame = oracle::textured_image(w, h, 3002, 24, 0.2);
    const Image degraded = inject_color_cast(frame, truth);
    const Image restored = color_correct(degraded, fitted);
    float max_abs = 0.0f;
    for (int c = 0; c < 3; ++c)
        max_abs = std::max(max_abs, (restored.plane(c) - frame.plane(c)).abs().maxCoeff());

    const double elapsed = seconds_since(t0);
    const bool pass = rel_err < 1e-6 && max_abs < 1e-5f && elapsed < 5.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "constants rel err %.2e (<1e-6), corrected max abs %.2e (<1e-5), %.2fs (<5s)",
                  rel_err, double(max_abs), elapsed);
    verdict(1, pass, detail);
}

TEST_CASE("criterion 2: photometric round trip") {
    // Gain recovery at 1e-6.
    const Image sharp = oracle::random_image(512, 512, 3, 3003, 0.05f, 0.85f);
    const std::array<double, 3> gains{1.37, 0.62, 1.08};
    const Image degraded = inject_brightness(sharp, gains);
    const PhotometricGain beta = photometric_gain(degraded, sharp);
    double gain_err = 0.0;
    for (int c = 0; c < 3; ++c) gain_err = std::max(gain_err, std::abs(beta.beta[c] * gains[c] - 1.0));

    // Delta L never degrades across simulated pairs.
    bool delta_ok = true;
    double worst_before = 0.0, worst_after = 0.0;
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
        const Image bg = oracle::textured_image(160, 120, 3010 + seed);
        MotionScript script;
        script.background = bg;
        script.sprite = oracle::random_image(20, 20, 3, 3020 + seed, 0.4f, 0.9f);
        script.sprite_alpha = Plane::Ones(20, 20);
        for (int f = 0; f < 8; ++f) script.transforms.push_back({40.0 + 2.0 * f, 50.0, 0.0});
        const SimulatedPair pair = simulate_pair(script);
        const std::array<double, 3> g{1.0 + 0.1 * (seed + 1), 0.95, 1.02};
        const Image blur_degraded = inject_brightness(pair.blurred, g);
        const PhotometricGain b = photometric_gain(blur_degraded, pair.sharp);
        const Image corrected = apply_gain(blur_degraded, b);
        const double before = delta_L(blur_degraded, pair.sharp);
        const double after = delta_L(corrected, pair.sharp);
        delta_ok = delta_ok && after <= before;
        worst_before = std::max(worst_before, before);
        worst_after = std::max(worst_after, after);
    }

    const bool pass = gain_err < 1e-6 && delta_ok;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "gain recovery err %.2e (<1e-6), delta_L %.4f -> %.4f non-increasing on all pairs",
                  gain_err, worst_before, worst_after);
    verdict(2, pass, detail);
}

TEST_CASE("criterion 3: geometric alignment") {
    const auto t0 = std::chrono::steady_clock::now();
    const Image sharp = oracle::textured_image(1024, 768, 3030, 24, 0.2);
    const MisalignedImage mis = inject_misalignment(sharp, 3.0, 0.0);

    const FlowField flow = estimate_flow(sharp, mis.image);
    const WarpResult aligned = warp(mis.image, flow);
    const double err_before = geometric_error(sharp, mis.image);
    const double err_after = geometric_error(sharp, aligned.image);
    const double psnr_before = psnr(sharp, mis.image);
    const double psnr_after = psnr(sharp, aligned.image);
    const double elapsed = seconds_since(t0);

    const bool pass =
        err_after <= 1.0 && (psnr_after - psnr_before) >= 10.0 && elapsed < 10.0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "geo error %.2f -> %.3f px (<=1), PSNR %.2f -> %.2f dB (gain %.2f >= 10), "
                  "%.2fs (<10s)",
                  err_before, err_after, psnr_before, psnr_after, psnr_after - psnr_before,
                  elapsed);
    verdict(3, pass, detail);
}

TEST_CASE("criterion 4: LBFMG mask quality over 20 scenes") {
    std::vector<double> ious;
    for (std::uint32_t scene_idx = 0; scene_idx < 20; ++scene_idx) {
        const MaskScene scene = mask_scene(4000 + scene_idx, scene_idx % 2 == 1);
        const LbfmgResult r = lbfmg_generate(scene.frames);
        ious.push_back(oracle::mask_iou(r.mask, scene.gt_mask));
    }
    std::vector<double> sorted = ious;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[9] + sorted[10]) / 2.0;
    const double minimum = sorted.front();

    // Static scenes must come back empty.
    const Image frame = oracle::textured_image(128, 96, 4100);
    SceneFrames static_scene;
    static_scene.sharp_static = frame;
    static_scene.blur_static = frame;
    static_scene.sharp_target = frame;
    static_scene.blur_target = frame;
    for (int k = 0; k < 4; ++k) static_scene.other_pairs.emplace_back(frame, frame);
    const double static_area = lbfmg_generate(static_scene).mask.area();

    const bool pass = median >= 0.8 && minimum >= 0.7 && static_area == 0.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "IoU median %.3f (>=0.8), min %.3f (>=0.7), static mask area %.0f (=0)",
                  median, minimum, static_area);
    verdict(4, pass, detail);
}

TEST_CASE("criterion 5: shift-invariant losses and gradients") {
    const Image s = oracle::random_image(24, 20, 3, 5001);
    bool exact = true;
    for (int l = -1; l <= 1; ++l)
        for (int k = -1; k <= 1; ++k) {
            const Image moved = shift(s, k, l).image;
            exact = exact && shift_invariant_mae(moved, s) == 0.0;
            exact = exact && shift_invariant_mse(moved, s) == 0.0;
            exact = exact && shift_invariant_ssim(moved, s) == -1.0;
            exact = exact && shift_invariant_msfr(moved, s) == 0.0;
        }

    const Image pred8 = oracle::random_image(8, 8, 3, 5002);
    const Image gt8 = oracle::random_image(8, 8, 3, 5003);
    const double msfr_lib = loss_msfr_images(pred8, gt8);
    const double msfr_oracle = oracle::msfr_scalar(pred8, gt8);
    const double msfr_rel = std::abs(msfr_lib - msfr_oracle) / msfr_oracle;

    const ImageD predd = oracle::random_image<double>(8, 8, 3, 5004);
    const ImageD gtd = oracle::random_image<double>(8, 8, 3, 5005);
    const GradCheckReport mse_check = grad_check(LossKind::mse, predd, gtd, 1e-4, 48);
    const GradCheckReport msfr_check = grad_check(LossKind::msfr, predd, gtd, 1e-4, 48);

    const bool pass = exact && msfr_rel < 1e-6 && mse_check.max_rel_error < 1e-4 &&
                      msfr_check.max_rel_error < 1e-4 && mse_check.checked >= 32 &&
                      msfr_check.checked >= 32;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "unit shifts exact %s, MSFR vs DFT oracle %.2e (<1e-6), grad MSE %.2e / "
                  "MSFR %.2e (<1e-4)",
                  exact ? "yes" : "no", msfr_rel, mse_check.max_rel_error,
                  msfr_check.max_rel_error);
    verdict(5, pass, detail);
}

TEST_CASE("criterion 6: gate block") {
    const Image feat = oracle::random_image(32, 24, 4, 6001, -3.0f, 3.0f);
    const Image blurred = oracle::random_image(32, 24, 3, 6002);
    const GateOutput out = gate_forward(feat, blurred);
    double oracle_err = 0.0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x) {
            const double m = 1.0 / (1.0 + std::exp(-double(feat.at(x, y, 3))));
            oracle_err = std::max(oracle_err, std::abs(double(out.pred_mask.at(x, y)) - m));
            for (int c = 0; c < 3; ++c) {
                const double expect = double(blurred.at(x, y, c)) + double(feat.at(x, y, c)) * m;
                oracle_err =
                    std::max(oracle_err, std::abs(double(out.pred_sharp.at(x, y, c)) - expect));
            }
        }

    Image saturating = feat;
    saturating.plane(3).setConstant(-20.0f);
    const GateOutput sat = gate_forward(saturating, blurred);
    float residual = 0.0f;
    for (int c = 0; c < 3; ++c)
        residual = std::max(residual, (sat.pred_sharp.plane(c) - blurred.plane(c)).abs().maxCoeff());

    const bool pass = oracle_err < 1e-6 && residual < 1e-7f;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "scalar-loop oracle err %.2e (<1e-6), saturated residual %.2e (<1e-7)",
                  oracle_err, double(residual));
    verdict(6, pass, detail);
}

TEST_CASE("criterion 7: blur-aware patch sampling") {
    const int w = 2152, h = 1436;
    // Rectangle with 11.75% of the frame area, off center.
    const double area = 0.1175 * w * h;
    const int side_y = int(std::sqrt(area / 2.0));
    const int side_x = int(area / side_y);
    BlurMask mask(w, h);
    for (int y = 300; y < 300 + side_y; ++y)
        for (int x = 500; x < 500 + side_x; ++x) mask.set(x, y, 1.0f);

    const PatchSampler sampler(w, h, mask, 256);
    const MaskIntegral integral(mask);
    const int draws = 100000;
    int blur_branch = 0, containing = 0;
    for (int i = 0; i < draws; ++i) {
        const PatchSpec spec = sampler.sample(7001, std::uint64_t(i));
        blur_branch += spec.blur_branch;
        containing += integral.any(spec.x, spec.y, spec.size);
    }
    const double branch_freq = double(blur_branch) / draws;
    const double contain_freq = double(containing) / draws;

    const bool pass =
        contain_freq >= 0.5 && branch_freq >= 0.49 && branch_freq <= 0.51;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "mask area %.4f, containing fraction %.4f (>=0.5), blur branch %.4f (0.5 +- 0.01)",
                  mask.area_fraction(), contain_freq, branch_freq);
    verdict(7, pass, detail);
}

TEST_CASE("criterion 8: metric oracles and aligned shift recovery") {
    const Image a = oracle::random_image(16, 16, 3, 8001);
    const Image b = oracle::random_image(16, 16, 3, 8002);
    std::mt19937 rng(8003);
    Plane m(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) m(y, x) = rng() % 2 ? 1.0f : 0.0f;
    const BlurMask mask{Plane(m)};

    const double psnr_err = std::abs(psnr(a, b) - oracle::psnr_scalar(a, b));
    const double ssim_err = std::abs(ssim(a, b) - oracle::ssim_scalar(a, b));
    const double wpsnr_err =
        std::abs(weighted_psnr(a, b, mask) - oracle::weighted_psnr_scalar(a, b, mask));
    const double wssim_err =
        std::abs(weighted_ssim(a, b, mask) - oracle::weighted_ssim_scalar(a, b, mask));
    const AlignedPsnrResult got = aligned_psnr(a, b, 4);
    const oracle::AlignedOracle expect = oracle::aligned_psnr_scalar(a, b, 4);
    const double apsnr_err = std::abs(got.psnr - expect.psnr);

    bool shifts_exact = got.shift_x == expect.k && got.shift_y == expect.l;
    const Image s = oracle::textured_image(64, 48, 8004);
    for (int l = -8; l <= 8 && shifts_exact; l += 2)
        for (int k = -8; k <= 8 && shifts_exact; k += 2) {
            const Image moved = shift(s, k, l).image;
            const AlignedPsnrResult r = aligned_psnr(s, moved, 8);
            shifts_exact = r.shift_x == -k && r.shift_y == -l && r.psnr == 100.0;
        }

    const double worst =
        std::max({psnr_err, ssim_err, wpsnr_err, wssim_err, apsnr_err});
    const bool pass = worst < 1e-9 && shifts_exact;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "oracle max err %.2e (<1e-9), known shifts to |8| recovered exactly: %s",
                  worst, shifts_exact ? "yes" : "no");
    verdict(8, pass, detail);
}

TEST_CASE("criterion 9: end-to-end pipeline on a degraded scene") {
    const fs::path dir = fs::temp_directory_path() / "lbtk_acceptance_scene";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string bin = cli_binary();

    const std::string sim_cmd =
        bin + " simulate --out " + (dir / "scene").string() +
        " --width 1024 --height 768 --frames 20 --pairs 2 --seed 17 --sprite-size 96"
        " --travel 40 --gains 1.12,0.95,1.05 --misalign 3,-2 >/dev/null 2>&1";
    REQUIRE(std::system(sim_cmd.c_str()) == 0);

    const auto t0 = std::chrono::steady_clock::now();
    const std::string pipe_cmd = bin + " pipeline --manifest " +
                                 (dir / "scene" / "manifest.json").string() + " --out " +
                                 (dir / "out").string() + " --report " +
                                 (dir / "report.json").string() +
                                 " --no-timestamp >/dev/null 2>&1";
    REQUIRE(std::system(pipe_cmd.c_str()) == 0);
    const double elapsed = seconds_since(t0);

    const Json report = read_json((dir / "report.json").string());
    const Json manifest = read_json((dir / "scene" / "manifest.json").string());
    const auto& ref = report.at("reference");
    const auto& gt = manifest.at("ground_truth");

    // Color correction succeeded: fitted constants track the injected
    // cast and the corrected whiteboard is flat.
    const auto& fitted = report.at("calibration").at("blur").at("constants");
    const auto& truth = gt.at("cast_blur").at("constants");
    double const_err = 0.0;
    for (const char* ch : {"r", "g", "b"}) {
        double max_gt = 0.0, max_err = 0.0;
        for (int i = 0; i < kColorBasisTerms; ++i) {
            const double t = truth.at(ch).at(i).get<double>();
            const double f = fitted.at(ch).at(i).get<double>();
            max_gt = std::max(max_gt, std::abs(t));
            max_err = std::max(max_err, std::abs(t - f));
        }
        const_err = std::max(const_err, max_err / max_gt);
    }
    double wb_after = 0.0;
    for (const auto& v : report.at("whiteboard_spread_after"))
        wb_after = std::max(wb_after, v.get<double>());

    // Photometric alignment: beta tracks the inverse injected gains and
    // delta L improved.
    double beta_err = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double g = gt.at("brightness_gains").at(c).get<double>();
        const double b = ref.at("beta").at(c).get<double>();
        beta_err = std::max(beta_err, std::abs(b * g - 1.0));
    }
    const double dl_before = ref.at("delta_l_before").get<double>();
    const double dl_after = ref.at("delta_l_after").get<double>();

    // Geometric alignment: residual error and PSNR gain.
    const double geo_after = ref.at("geo_error_after").get<double>();
    const double gain =
        ref.at("psnr_after").get<double>() - ref.at("psnr_before").get<double>();

    const bool pass = elapsed < 60.0 && const_err < 5e-3 && wb_after < 1e-2 &&
                      beta_err < 1e-2 && dl_after <= dl_before && geo_after <= 1.0 &&
                      gain >= 10.0;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "%.1fs (<60s); constants err %.2e, wb spread %.2e; beta err %.2e, "
                  "delta_L %.4f->%.4f; geo %.3fpx (<=1), PSNR gain %.1f dB (>=10)",
                  elapsed, const_err, wb_after, beta_err, dl_before, dl_after, geo_after,
                  gain);
    verdict(9, pass, detail);
}

}  // TEST_SUITE
