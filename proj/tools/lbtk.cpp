// lbtk — local blur toolkit command line.
//
// Subcommands cover the full paired-capture workflow: simulate a
// two-camera scene with known degradations, calibrate and undo the color
// cast, photometrically and geometrically align pairs, convert RAW to
// RGB, generate ground-truth blur masks, synthesize local blur, sample
// training patches, and score predictions.

#include "lbtk/align.hpp"
#include "lbtk/bgsub.hpp"
#include "lbtk/capture.hpp"
#include "lbtk/color_calib.hpp"
#include "lbtk/image_io.hpp"
#include "lbtk/image_ops.hpp"
#include "lbtk/isp.hpp"
#include "lbtk/losses.hpp"
#include "lbtk/manifest.hpp"
#include "lbtk/metrics.hpp"
#include "lbtk/sampler.hpp"
#include "lbtk/synthblur.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace fs = std::filesystem;
using namespace lbtk;

namespace {

struct GlobalFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    bool no_timestamp = false;
    int jobs = 1;
};

Config load_config(const GlobalFlags& g) {
    Config cfg;
    if (!g.config_path.empty()) cfg = Config::load(g.config_path);
    for (const auto& kv : g.overrides) cfg.apply_override(kv);
    return cfg;
}

IspConfig isp_from_config(const Config& cfg) {
    IspConfig isp;
    const auto gains = cfg.get_doubles("isp.wb", {1.0, 1.0, 1.0});
    require(gains.size() == 3, "isp.wb needs three values");
    std::copy(gains.begin(), gains.end(), isp.wb_gains.begin());
    const auto mat = cfg.get_doubles("isp.matrix", {1, 0, 0, 0, 1, 0, 0, 0, 1});
    require(mat.size() == 9, "isp.matrix needs nine values");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) isp.color_matrix(r, c) = mat[r * 3 + c];
    isp.gamma = cfg.get_double("isp.gamma", 2.2);
    return isp;
}

FlowOptions flow_from_config(const Config& cfg) {
    FlowOptions opts;
    opts.levels = cfg.get_int("align.levels", 3);
    opts.block_size = cfg.get_int("align.block", 64);
    opts.block_stride = cfg.get_int("align.stride", 32);
    opts.max_flow = cfg.get_double("align.max_flow", 32.0);
    return opts;
}

LbfmgOptions lbfmg_from_config(const Config& cfg) {
    LbfmgOptions opts;
    opts.gmm.max_components = cfg.get_int("lbfmg.components", 5);
    opts.gmm.learning_rate = cfg.get_double("lbfmg.rho", 0.05);
    opts.gmm.background_ratio = cfg.get_double("lbfmg.bg_ratio", 0.9);
    opts.morph_size = cfg.get_int("lbfmg.morph", 5);
    opts.morph_iterations = cfg.get_int("lbfmg.morph_iterations", 1);
    return opts;
}

LossWeights weights_from_config(const Config& cfg) {
    LossWeights w;
    w.mask = cfg.get_double("loss.mask", 0.01);
    w.mae = cfg.get_double("loss.mae", 1.0);
    w.ssim = cfg.get_double("loss.ssim", 1.0);
    w.msfr = cfg.get_double("loss.msfr", 0.1);
    return w;
}

Json calibration_json(const ColorCalibration& c) {
    return Json::parse(c.to_json_string());
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string out_dir;
    int width = 1024, height = 768;
    int frames = 30;
    int pairs = 3;
    std::uint64_t seed = 1;
    int sprite_size = 96;
    std::string sprite_kind = "texture";  // square | disc | texture
    double travel = 48.0;
    double cast_strength = 0.04;
    std::vector<double> gains{1.12, 0.95, 1.05};
    std::vector<double> misalign{3.0, -2.0};
    std::string domain = "raw";
};

Image procedural_texture(int w, int h, std::uint64_t seed, double max_freq = 0.2) {
    std::mt19937 rng{std::uint32_t(seed)};
    std::uniform_real_distribution<double> freq(0.015, max_freq);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> orient(0.0, 3.141592653589793);
    Image img(w, h, 3);
    const int waves = 24;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::array<double, 3>> comps;
        for (int k = 0; k < waves; ++k) {
            const double f = freq(rng), th = orient(rng), ph = phase(rng);
            comps.push_back({f * std::cos(th), f * std::sin(th), ph});
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.4;
                for (const auto& cm : comps)
                    v += 0.4 / waves *
                         std::sin(6.283185307179586 * (cm[0] * x + cm[1] * y) + cm[2]);
                // Headroom keeps the degraded capture below sensor
                // saturation for the default cast and gain magnitudes.
                img.at(x, y, c) = float(std::clamp(v, 0.02, 0.75));
            }
    }
    return img;
}

MotionScript build_script(const SimulateArgs& a, const Image& background, int pair_index) {
    MotionScript script;
    script.background = background;
    const int side = a.sprite_size;
    script.sprite = Image(side, side, 3, 0.0f);
    script.sprite_alpha = Plane::Zero(side, side);
    std::mt19937 rng{std::uint32_t(a.seed * 977 + pair_index)};
    std::uniform_real_distribution<float> bright(0.75f, 1.0f);
    const Image tex = procedural_texture(side, side, a.seed * 31 + pair_index, 0.3);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double r = std::hypot(x - (side - 1) / 2.0, y - (side - 1) / 2.0);
            bool inside = true;
            if (a.sprite_kind == "disc") inside = r <= side / 2.0;
            if (!inside) continue;
            script.sprite_alpha(y, x) = 1.0f;
            for (int c = 0; c < 3; ++c)
                script.sprite.at(x, y, c) =
                    a.sprite_kind == "texture" ? std::min(1.0f, tex.at(x, y, c) + 0.35f)
                                               : bright(rng);
        }

    // Travel left to right across captures, one short sweep per exposure.
    const double usable = a.width - side - 2.0 * (a.travel + 8.0);
    const double x0 = a.travel + 8.0 + usable * pair_index / std::max(1, a.pairs);
    const double y0 = (a.height - side) / 2.0;
    for (int f = 0; f < a.frames; ++f) {
        const double t = a.frames == 1 ? 0.0 : double(f) / (a.frames - 1);
        script.transforms.push_back({x0 + a.travel * t, y0, 0.0});
    }
    return script;
}

ColorCalibration random_cast(int w, int h, std::uint64_t seed, double strength) {
    std::mt19937 rng{std::uint32_t(seed)};
    std::uniform_real_distribution<double> coeff(-strength, strength);
    std::array<std::array<double, kColorBasisTerms>, 3> k{};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i + 1 < kColorBasisTerms; ++i) k[c][i] = coeff(rng);
        k[c][kColorBasisTerms - 1] = 1.0;
    }
    ColorCalibration calib(k, w, h);
    // Normalize so the gain is exactly 1 at the frame center; gains are
    // only identifiable relative to the calibration target patch.
    for (int c = 0; c < 3; ++c) {
        const double at_center = calib.gain(c, w / 2.0, h / 2.0);
        for (int i = 0; i < kColorBasisTerms; ++i) k[c][i] /= at_center;
    }
    return ColorCalibration(k, w, h);
}

int cmd_simulate(const SimulateArgs& a, const GlobalFlags& g) {
    const Config cfg = load_config(g);
    require(a.width % 2 == 0 && a.height % 2 == 0, "frame dimensions must be even");
    require(a.gains.size() == 3, "--gains needs three values");
    require(a.misalign.size() == 2, "--misalign needs dx,dy");
    fs::create_directories(a.out_dir);

    const Image background = procedural_texture(a.width, a.height, a.seed);
    const ColorCalibration cast_blur = random_cast(a.width, a.height, a.seed * 7 + 1, a.cast_strength);
    const ColorCalibration cast_sharp =
        random_cast(a.width, a.height, a.seed * 7 + 2, a.cast_strength * 0.5);
    const std::array<double, 3> gains{a.gains[0], a.gains[1], a.gains[2]};

    SceneManifest manifest;
    manifest.width = a.width;
    manifest.height = a.height;
    manifest.domain = a.domain;

    std::int64_t clipped_samples = 0;
    const auto degrade_and_save = [&](const Image& linear_rgb, bool blur_stream,
                                      bool misalign, const std::string& name) {
        Image rgb = linear_rgb;
        if (blur_stream && misalign)
            rgb = inject_misalignment(rgb, a.misalign[0], a.misalign[1]).image;
        if (a.domain == "raw") {
            BayerImage raw = mosaic(rgb, BayerPattern::RGGB);
            raw = inject_color_cast(raw, blur_stream ? cast_blur : cast_sharp);
            if (blur_stream) raw = inject_brightness(raw, gains);
            clipped_samples += (raw.data() > 1.0f).count();
            save_bayer(raw, (fs::path(a.out_dir) / name).string());
        } else {
            rgb = inject_color_cast(rgb, blur_stream ? cast_blur : cast_sharp);
            if (blur_stream) rgb = inject_brightness(rgb, gains);
            for (int c = 0; c < 3; ++c) clipped_samples += (rgb.plane(c) > 1.0f).count();
            save_png16(rgb, (fs::path(a.out_dir) / name).string());
        }
        return name;
    };

    // Whiteboard pair: a flat field through each camera's cast, exposed
    // with headroom so no channel saturates under the injected gains.
    const Image whiteboard(a.width, a.height, 3, 0.5f);
    manifest.whiteboard_blur = degrade_and_save(whiteboard, true, false, "wb_blur.png");
    manifest.whiteboard_sharp = degrade_and_save(whiteboard, false, false, "wb_sharp.png");

    // Static reference pair: background only, no foreground motion.
    manifest.reference_blur = degrade_and_save(background, true, true, "ref_blur.png");
    manifest.reference_sharp = degrade_and_save(background, false, false, "ref_sharp.png");

    Json gt;
    gt["cast_blur"] = calibration_json(cast_blur);
    gt["cast_sharp"] = calibration_json(cast_sharp);
    gt["brightness_gains"] = a.gains;
    gt["misalign_px"] = a.misalign;
    gt["frames_per_exposure"] = a.frames;
    gt["seed"] = a.seed;
    gt["masks"] = Json::array();

    for (int k = 0; k < a.pairs; ++k) {
        const MotionScript script = build_script(a, background, k);
        const SimulatedPair pair = simulate_pair(script, cfg.get_double("capture.mask_eps", 2.0 / 255.0));
        char id[16];
        std::snprintf(id, sizeof(id), "%04d", k);
        PairEntry entry;
        entry.id = id;
        entry.blur = degrade_and_save(pair.blurred, true, true,
                                      std::string("pair_") + id + "_blur.png");
        entry.sharp = degrade_and_save(pair.sharp, false, false,
                                       std::string("pair_") + id + "_sharp.png");
        const std::string mask_name = std::string("pair_") + id + "_mask.png";
        save_mask_png(pair.gt_mask, (fs::path(a.out_dir) / mask_name).string());
        entry.mask = mask_name;
        gt["masks"].push_back(mask_name);
        manifest.pairs.push_back(entry);
    }

    manifest.ground_truth = gt;
    manifest.save((fs::path(a.out_dir) / "manifest.json").string());

    Json report = make_report("simulate", !g.no_timestamp);
    report["out_dir"] = a.out_dir;
    report["frame"] = {{"width", a.width}, {"height", a.height}};
    report["pairs"] = a.pairs;
    report["domain"] = a.domain;
    const CaptureConfig cc;
    const ExposureTimes et = required_short_exposure(cc);
    report["exposure_rule"] = {{"t_short_s", et.t_short}, {"t_long_s", et.t_long},
                               {"transmittance", cc.transmittance}};
    report["clipped_samples"] = clipped_samples;
    if (clipped_samples > 0)
        std::cerr << "warning: " << clipped_samples
                  << " samples clipped at sensor saturation\n";
    write_json(report, (fs::path(a.out_dir) / "simulate_report.json").string());
    std::cout << "wrote scene with " << a.pairs << " pairs to " << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------- calibrate / correct

bool has_sidecar(const std::string& path) { return fs::exists(path + ".meta"); }

int cmd_calibrate_color(const std::string& input, const std::string& out_path, int grid_cols,
                        int grid_rows, const std::string& report_path, const GlobalFlags& g) {
    PatchGrid grid;
    int w = 0, h = 0;
    if (has_sidecar(input)) {
        const BayerImage raw = load_bayer(input);
        grid = measure_patch_grid(raw, grid_cols, grid_rows);
        w = raw.width();
        h = raw.height();
    } else {
        const Image img = load_png16(input);
        grid = measure_patch_grid(img, grid_cols, grid_rows);
        w = img.width();
        h = img.height();
    }
    const ColorCalibration calib =
        fit_color_constants(grid.means, grid.centers, grid.central_index, w, h, grid.patch_size);
    calib.save(out_path);

    Json report = make_report("calibrate-color", !g.no_timestamp);
    report["input"] = input;
    report["calibration"] = out_path;
    report["grid"] = {{"cols", grid_cols}, {"rows", grid_rows}, {"patch_size", grid.patch_size}};
    report["residual_rms"] = calib.residual_rms;
    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_correct(const std::string& input, const std::string& calib_path,
                const std::string& out_path) {
    const ColorCalibration calib = ColorCalibration::load(calib_path);
    if (has_sidecar(input)) {
        const BayerImage raw = load_bayer(input);
        save_bayer(color_correct(raw, calib), out_path);
    } else {
        save_image(color_correct(load_image(input), calib), out_path);
    }
    std::cout << "corrected " << input << " -> " << out_path << "\n";
    return 0;
}

// ------------------------------------------------------------------ align

int cmd_align(const std::string& manifest_path, const std::string& out_dir,
              const std::string& report_path, const GlobalFlags& g) {
    const Config cfg = load_config(g);
    const SceneManifest m = SceneManifest::load(manifest_path);
    require(m.domain == "rgb", "align expects an RGB-domain manifest (run pipeline on RAW)");
    require(m.has_reference(), "align needs a reference pair in the manifest");
    fs::create_directories(out_dir);

    const Image ref_sharp = load_image(m.resolve(m.reference_sharp));
    const Image ref_blur = load_image(m.resolve(m.reference_blur));
    const FlowField flow = estimate_flow(ref_sharp, ref_blur, flow_from_config(cfg));
    save_flow_pfm(flow, (fs::path(out_dir) / "flow.pfm").string());

    Json report = make_report("align", !g.no_timestamp);
    report["manifest"] = manifest_path;
    report["reference"] = {{"geo_error_before", geometric_error(ref_sharp, ref_blur)}};
    const WarpResult ref_aligned = warp(ref_blur, flow);
    report["reference"]["geo_error_after"] = geometric_error(ref_sharp, ref_aligned.image);
    report["reference"]["psnr_before"] = psnr(ref_sharp, ref_blur);
    report["reference"]["psnr_after"] = psnr(ref_sharp, ref_aligned.image);
    report["pairs"] = Json::array();

    for (const auto& p : m.pairs) {
        const Image blur = load_image(m.resolve(p.blur));
        const WarpResult aligned = warp(blur, flow);
        const std::string out_name = "pair_" + p.id + "_blur_aligned.png";
        save_image(aligned.image, (fs::path(out_dir) / out_name).string());
        const Image sharp = load_image(m.resolve(p.sharp));
        Json entry;
        entry["id"] = p.id;
        entry["aligned"] = out_name;
        entry["psnr_before"] = psnr(sharp, blur);
        entry["psnr_after"] = psnr(sharp, aligned.image);
        report["pairs"].push_back(entry);
    }
    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------- gen-mask

int cmd_gen_mask(const std::string& manifest_path, const std::string& target_id,
                 const std::string& out_dir, const std::string& report_path,
                 const GlobalFlags& g) {
    const Config cfg = load_config(g);
    const SceneManifest m = SceneManifest::load(manifest_path);
    require(m.domain == "rgb", "gen-mask expects an RGB-domain manifest (run pipeline on RAW)");
    require(m.has_reference(), "gen-mask needs the static reference pair");
    require(!m.pairs.empty(), "gen-mask needs at least one target pair");
    fs::create_directories(out_dir);

    const LbfmgOptions opts = lbfmg_from_config(cfg);
    Json report = make_report("gen-mask", !g.no_timestamp);
    report["manifest"] = manifest_path;
    report["masks"] = Json::array();

    for (const auto& target : m.pairs) {
        if (!target_id.empty() && target.id != target_id) continue;
        SceneFrames frames;
        frames.sharp_static = load_image(m.resolve(m.reference_sharp));
        frames.blur_static = load_image(m.resolve(m.reference_blur));
        frames.sharp_target = load_image(m.resolve(target.sharp));
        frames.blur_target = load_image(m.resolve(target.blur));
        for (const auto& other : m.pairs) {
            if (other.id == target.id) continue;
            frames.other_pairs.emplace_back(load_image(m.resolve(other.sharp)),
                                            load_image(m.resolve(other.blur)));
        }
        const LbfmgResult r = lbfmg_generate(frames, opts);
        const std::string name = "mask_" + target.id + ".png";
        save_mask_png(r.mask, (fs::path(out_dir) / name).string());
        Json entry;
        entry["id"] = target.id;
        entry["mask"] = name;
        entry["area_fraction"] = r.mask.area_fraction();
        report["masks"].push_back(entry);
    }
    require(!report["masks"].empty(), "target pair not found in manifest: " + target_id);
    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// -------------------------------------------------------------- synth-blur

int cmd_synth_blur(const std::string& input, const std::string& mask_path,
                   const std::string& mode, int steps, double magnitude, double direction,
                   bool no_kernel, bool kernel_first, const std::string& out_path,
                   const std::string& out_mask, const GlobalFlags& g) {
    SynthBlurOptions opts;
    if (mode == "translation") opts.mode = BlurMode::translation;
    else if (mode == "rotation") opts.mode = BlurMode::rotation;
    else throw Error(Error::Kind::usage, "mode must be translation or rotation");
    opts.steps = steps;
    opts.magnitude = magnitude;
    opts.direction_deg = direction;
    opts.apply_kernel = !no_kernel;
    opts.kernel_before_motion = kernel_first;

    const Image sharp = load_image(input);
    const BlurMask mask = load_mask_png(mask_path);
    const SynthBlurResult r = synth_local_blur(sharp, mask, opts);
    save_image(r.image, out_path);
    if (!out_mask.empty()) save_mask_png(r.footprint, out_mask);

    Json report = make_report("synth-blur", !g.no_timestamp);
    report["input"] = input;
    report["output"] = out_path;
    report["empty_mask_warning"] = r.empty_mask;
    report["blur_span_px"] = blur_span_px(mask, opts);
    report["footprint_fraction"] = r.footprint.area_fraction();
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ------------------------------------------------------------------- crop

int cmd_crop(const std::string& mask_path, int count, std::uint64_t seed, int size,
             bool with_augment, const std::string& out_path) {
    const BlurMask mask = load_mask_png(mask_path);
    const PatchSampler sampler(mask.width(), mask.height(), mask, size);
    std::ofstream out(out_path);
    require(out.good(), "cannot open patch manifest for writing: " + out_path);
    for (int i = 0; i < count; ++i) {
        PatchSpec spec = sampler.sample(seed, std::uint64_t(i));
        if (with_augment) spec = augment(spec, seed, std::uint64_t(i));
        Json line;
        line["index"] = i;
        line["x"] = spec.x;
        line["y"] = spec.y;
        line["size"] = spec.size;
        line["flip_h"] = spec.flip_h;
        line["flip_v"] = spec.flip_v;
        line["blur_branch"] = spec.blur_branch;
        out << line.dump() << "\n";
    }
    std::cout << "wrote " << count << " patch specs to " << out_path << "\n";
    return 0;
}

// --------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& manifest_path, const std::string& report_path, int radius,
                 const GlobalFlags& g) {
    const Json j = read_json(manifest_path);
    require(j.value("kind", "") == "evaluation_manifest",
            "not an evaluation manifest: " + manifest_path);
    const std::string base = fs::path(manifest_path).parent_path().string();
    const auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() || base.empty() ? p : (fs::path(base) / p).string();
    };

    struct Entry {
        std::string id, reference, test, mask;
    };
    std::vector<Entry> entries;
    for (const auto& e : j.at("entries"))
        entries.push_back({e.value("id", std::to_string(entries.size())),
                           e.at("reference").get<std::string>(), e.at("test").get<std::string>(),
                           e.value("mask", "")});
    require(!entries.empty(), "evaluation manifest has no entries");

    std::vector<Json> rows(entries.size());
    std::atomic<size_t> next{0};
    const auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < entries.size(); i = next.fetch_add(1)) {
            const Entry& e = entries[i];
            const Image reference = load_image(resolve(e.reference));
            const Image test = load_image(resolve(e.test));
            const BlurMask mask = e.mask.empty()
                                      ? BlurMask(reference.width(), reference.height(), 1.0f)
                                      : load_mask_png(resolve(e.mask));
            const MetricReport r = evaluate_pair(reference, test, mask, radius);
            Json row;
            row["id"] = e.id;
            row["psnr"] = r.psnr;
            row["ssim"] = r.ssim;
            row["psnr_w"] = r.weighted_psnr;
            row["ssim_w"] = r.weighted_ssim;
            row["psnr_a"] = r.aligned_psnr;
            row["aligned_shift"] = {r.aligned_shift_x, r.aligned_shift_y};
            rows[i] = std::move(row);
        }
    };
    std::vector<std::thread> pool;
    const int jobs = std::max(1, g.jobs);
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Json report = make_report("evaluate", !g.no_timestamp);
    report["manifest"] = manifest_path;
    report["pairs"] = Json::array();
    double sp = 0, ss = 0, swp = 0, sws = 0, sa = 0;
    for (const auto& row : rows) {
        report["pairs"].push_back(row);
        sp += row["psnr"].get<double>();
        ss += row["ssim"].get<double>();
        swp += row["psnr_w"].get<double>();
        sws += row["ssim_w"].get<double>();
        sa += row["psnr_a"].get<double>();
    }
    const double n = double(rows.size());
    report["aggregate"] = {{"psnr", sp / n},   {"ssim", ss / n},   {"psnr_w", swp / n},
                           {"ssim_w", sws / n}, {"psnr_a", sa / n}, {"count", rows.size()}};
    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// -------------------------------------------------------------- loss-check

int cmd_loss_check(const std::string& pred_path, const std::string& gt_path,
                   const std::string& pred_mask_path, const std::string& gt_mask_path,
                   const std::string& report_path, const GlobalFlags& g) {
    const Config cfg = load_config(g);
    const Image pred = load_image(pred_path);
    const Image gt = load_image(gt_path);
    require(pred.same_dims(gt), "prediction and ground truth dimensions mismatch");

    const BlurMask pred_mask = pred_mask_path.empty()
                                   ? BlurMask(pred.width(), pred.height(), 1.0f)
                                   : load_mask_png(pred_mask_path);
    const BlurMask gt_mask = gt_mask_path.empty()
                                 ? BlurMask(pred.width(), pred.height(), 1.0f)
                                 : load_mask_png(gt_mask_path);

    const auto pred_pyr = build_pyramid(pred, kMsfrLevels);
    const auto gt_pyr = build_pyramid(gt, kMsfrLevels);
    const LossBreakdown b =
        total_loss(pred_pyr, gt_pyr, pred_mask, gt_mask, weights_from_config(cfg));

    Json report = make_report("loss-check", !g.no_timestamp);
    report["prediction"] = pred_path;
    report["ground_truth"] = gt_path;
    report["terms"] = {{"mask", b.mask_term},
                       {"mae", b.mae_term},
                       {"ssim", b.ssim_term},
                       {"msfr", b.msfr_term},
                       {"total", b.total}};
    report["shifts"] = {{"mask", b.mask_shift}, {"msfr", b.msfr_shift}};

    // Gradient validation runs on a small double-precision central crop.
    const int cw = std::min(16, pred.width()), ch = std::min(16, pred.height());
    const Rect center{(pred.width() - cw) / 2, (pred.height() - ch) / 2, cw, ch};
    const ImageD pd = crop(pred, center).cast<double>();
    const ImageD gd = crop(gt, center).cast<double>();
    report["grad_check"] = Json::object();
    const std::pair<const char*, LossKind> kinds[] = {{"mse", LossKind::mse},
                                                      {"mae", LossKind::mae},
                                                      {"msfr", LossKind::msfr},
                                                      {"ssim", LossKind::ssim}};
    for (const auto& [name, kind] : kinds) {
        const GradCheckReport r = grad_check(kind, pd, gd, 1e-4);
        report["grad_check"][name] = {{"max_rel_error", r.max_rel_error},
                                      {"checked", r.checked},
                                      {"skipped", r.skipped.size()},
                                      {"analytic", kind != LossKind::ssim}};
    }
    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------- pipeline

int cmd_pipeline(const std::string& manifest_path, const std::string& out_dir,
                 const std::string& report_path, const GlobalFlags& g) {
    const Config cfg = load_config(g);
    const SceneManifest m = SceneManifest::load(manifest_path);
    require(m.domain == "raw", "pipeline expects a RAW-domain scene manifest");
    require(m.has_whiteboard(), "pipeline needs the whiteboard pair for color calibration");
    require(m.has_reference(), "pipeline needs the static reference pair");
    fs::create_directories(out_dir);

    const int grid_cols = cfg.get_int("calib.grid_cols", 10);
    const int grid_rows = cfg.get_int("calib.grid_rows", 8);
    const IspPipeline isp(isp_from_config(cfg));

    Json report = make_report("pipeline", !g.no_timestamp);
    report["manifest"] = manifest_path;
    report["stages"] = {"color-correct", "photometric-align", "isp", "geometric-align"};

    // Stage 1: per-camera color calibration from the whiteboard pair.
    const BayerImage wb_blur = load_bayer(m.resolve(m.whiteboard_blur));
    const BayerImage wb_sharp = load_bayer(m.resolve(m.whiteboard_sharp));
    const PatchGrid grid_blur = measure_patch_grid(wb_blur, grid_cols, grid_rows);
    const PatchGrid grid_sharp = measure_patch_grid(wb_sharp, grid_cols, grid_rows);
    const ColorCalibration calib_blur =
        fit_color_constants(grid_blur.means, grid_blur.centers, grid_blur.central_index,
                            wb_blur.width(), wb_blur.height(), grid_blur.patch_size);
    const ColorCalibration calib_sharp =
        fit_color_constants(grid_sharp.means, grid_sharp.centers, grid_sharp.central_index,
                            wb_sharp.width(), wb_sharp.height(), grid_sharp.patch_size);
    calib_blur.save((fs::path(out_dir) / "calib_blur.json").string());
    calib_sharp.save((fs::path(out_dir) / "calib_sharp.json").string());
    report["calibration"] = {{"blur", calibration_json(calib_blur)},
                             {"sharp", calibration_json(calib_sharp)}};

    // Whiteboard flatness before and after correction, per channel.
    const auto wb_spread = [&](const BayerImage& wb) {
        std::array<double, 3> spread{};
        std::array<double, 3> lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
        const PatchGrid grid = measure_patch_grid(wb, grid_cols, grid_rows);
        for (const auto& pm : grid.means)
            for (int c = 0; c < 3; ++c) {
                lo[c] = std::min(lo[c], pm[c]);
                hi[c] = std::max(hi[c], pm[c]);
            }
        for (int c = 0; c < 3; ++c) spread[c] = hi[c] - lo[c];
        return spread;
    };
    report["whiteboard_spread_before"] = wb_spread(wb_blur);
    report["whiteboard_spread_after"] = wb_spread(color_correct(wb_blur, calib_blur));

    struct ProcessedPair {
        Image before_blur, before_sharp;  // plain ISP, no corrections
        Image blur, sharp;                // corrected, pre-alignment
    };

    const auto process_pair = [&](const std::string& blur_rel, const std::string& sharp_rel,
                                  Json& entry) {
        ProcessedPair pp;
        const BayerImage raw_blur = load_bayer(m.resolve(blur_rel));
        const BayerImage raw_sharp = load_bayer(m.resolve(sharp_rel));

        // Baseline: plain ISP with no corrections.
        pp.before_blur = isp.run(raw_blur);
        pp.before_sharp = isp.run(raw_sharp);
        entry["delta_l_before"] = delta_L(pp.before_blur, pp.before_sharp);

        // Color correction, photometric alignment in the RAW domain, ISP.
        const BayerImage cc_blur = color_correct(raw_blur, calib_blur);
        const BayerImage cc_sharp = color_correct(raw_sharp, calib_sharp);
        const PhotometricGain beta = photometric_gain(cc_blur, cc_sharp);
        entry["beta"] = beta.beta;
        pp.blur = isp.run(apply_gain(cc_blur, beta));
        pp.sharp = isp.run(cc_sharp);
        return pp;
    };

    // PSNR restricted to pixels the warp could actually source; the
    // before/after comparison runs on the same pixel set.
    const auto masked_psnr = [](const Image& ref, const Image& test, const BlurMask& valid) {
        double acc = 0.0;
        std::int64_t n = 0;
        for (int y = 0; y < ref.height(); ++y)
            for (int x = 0; x < ref.width(); ++x) {
                if (valid.at(x, y) < 0.5f) continue;
                for (int c = 0; c < ref.channels(); ++c) {
                    const double d = double(ref.at(x, y, c)) - double(test.at(x, y, c));
                    acc += d * d;
                }
                ++n;
            }
        require(n > 0, "warp produced no valid pixels");
        const double mse = acc / (double(n) * ref.channels());
        return mse < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
    };

    // The corrected pair is geometrically aligned before the "after"
    // measurements so the report reflects the full pipeline output.
    const auto finish_pair = [&](const ProcessedPair& pp, const WarpResult& aligned,
                                 Json& entry) {
        entry["delta_l_after"] = delta_L(aligned.image, pp.sharp);
        entry["psnr_region"] = "warp-valid";
        entry["psnr_before"] = masked_psnr(pp.before_sharp, pp.before_blur, aligned.valid);
        entry["psnr_after"] = masked_psnr(pp.sharp, aligned.image, aligned.valid);
    };

    // Stages 1-3 on the reference pair, then flow estimation (stage 4).
    Json ref_entry;
    const ProcessedPair ref_pp = process_pair(m.reference_blur, m.reference_sharp, ref_entry);
    ref_entry["geo_error_before"] = geometric_error(ref_pp.sharp, ref_pp.blur);
    const FlowField flow = estimate_flow(ref_pp.sharp, ref_pp.blur, flow_from_config(cfg));
    save_flow_pfm(flow, (fs::path(out_dir) / "flow.pfm").string());
    const WarpResult ref_aligned = warp(ref_pp.blur, flow);
    ref_entry["geo_error_after"] = geometric_error(ref_pp.sharp, ref_aligned.image);
    finish_pair(ref_pp, ref_aligned, ref_entry);
    save_image(ref_aligned.image, (fs::path(out_dir) / "ref_blur_processed.png").string());
    save_image(ref_pp.sharp, (fs::path(out_dir) / "ref_sharp_processed.png").string());
    report["reference"] = ref_entry;

    // Output manifest for downstream commands (gen-mask, evaluate).
    SceneManifest out_manifest;
    out_manifest.width = m.width;
    out_manifest.height = m.height;
    out_manifest.domain = "rgb";
    out_manifest.reference_blur = "ref_blur_processed.png";
    out_manifest.reference_sharp = "ref_sharp_processed.png";

    report["pairs"] = Json::array();
    for (const auto& p : m.pairs) {
        Json entry;
        entry["id"] = p.id;
        const ProcessedPair pp = process_pair(p.blur, p.sharp, entry);
        const WarpResult aligned = warp(pp.blur, flow);
        finish_pair(pp, aligned, entry);
        const std::string blur_name = "pair_" + p.id + "_blur_processed.png";
        const std::string sharp_name = "pair_" + p.id + "_sharp_processed.png";
        save_image(aligned.image, (fs::path(out_dir) / blur_name).string());
        save_image(pp.sharp, (fs::path(out_dir) / sharp_name).string());
        PairEntry out_pair;
        out_pair.id = p.id;
        out_pair.blur = blur_name;
        out_pair.sharp = sharp_name;
        if (!p.mask.empty()) {
            // Ground-truth masks pass through untouched.
            const BlurMask mask = load_mask_png(m.resolve(p.mask));
            const std::string mask_name = "pair_" + p.id + "_mask.png";
            save_mask_png(mask, (fs::path(out_dir) / mask_name).string());
            out_pair.mask = mask_name;
        }
        out_manifest.pairs.push_back(out_pair);
        report["pairs"].push_back(entry);
    }
    out_manifest.save((fs::path(out_dir) / "manifest.json").string());

    if (!report_path.empty()) write_json(report, report_path);
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lbtk — paired-capture simulation, post-processing, blur masks, losses "
                 "and local-deblurring metrics"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags g;
    app.add_option("--config", g.config_path, "key = value configuration file");
    app.add_option("--set", g.overrides, "config override key=value (repeatable)");
    app.add_flag("--no-timestamp", g.no_timestamp, "omit timestamps for byte-identical reports");
    app.add_option("--jobs", g.jobs, "worker threads for per-pair parallel commands");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "render a degraded two-camera scene");
    simulate->add_option("--out", sim.out_dir, "output directory")->required();
    simulate->add_option("--width", sim.width);
    simulate->add_option("--height", sim.height);
    simulate->add_option("--frames", sim.frames, "frames per long exposure");
    simulate->add_option("--pairs", sim.pairs, "number of captured pairs");
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--sprite-size", sim.sprite_size);
    simulate->add_option("--sprite", sim.sprite_kind, "square | disc | texture");
    simulate->add_option("--travel", sim.travel, "px of motion per exposure");
    simulate->add_option("--cast-strength", sim.cast_strength);
    simulate->add_option("--gains", sim.gains)->delimiter(',');
    simulate->add_option("--misalign", sim.misalign)->delimiter(',');
    simulate->add_option("--domain", sim.domain, "raw | rgb");

    std::string input, calib_path, out_path, out_mask, report_path, manifest_path, target_id;
    std::string pred_path, gt_path, pred_mask_path, gt_mask_path, mode = "translation";
    int grid_cols = 10, grid_rows = 8, steps = 5, count = 16, size = 256, radius = 8;
    double magnitude = 8.0, direction = 0.0;
    std::uint64_t seed = 1;
    bool no_kernel = false, kernel_first = false, with_augment = false;

    auto* calibrate = app.add_subcommand("calibrate-color", "fit gain constants from a flat capture");
    calibrate->add_option("--input", input, "whiteboard capture (RAW png+meta or RGB png)")->required();
    calibrate->add_option("--out", out_path, "calibration JSON")->required();
    calibrate->add_option("--grid-cols", grid_cols);
    calibrate->add_option("--grid-rows", grid_rows);
    calibrate->add_option("--report", report_path);

    auto* correct = app.add_subcommand("correct", "apply a color calibration");
    correct->add_option("--input", input)->required();
    correct->add_option("--calib", calib_path)->required();
    correct->add_option("--out", out_path)->required();

    auto* align_cmd = app.add_subcommand("align", "estimate reference flow and warp pairs");
    align_cmd->add_option("--manifest", manifest_path)->required();
    align_cmd->add_option("--out", out_path, "output directory")->required();
    align_cmd->add_option("--report", report_path);

    auto* gen_mask = app.add_subcommand("gen-mask", "generate ground-truth blur masks");
    gen_mask->add_option("--manifest", manifest_path)->required();
    gen_mask->add_option("--target", target_id, "pair id (default: all pairs)");
    gen_mask->add_option("--out", out_path, "output directory")->required();
    gen_mask->add_option("--report", report_path);

    auto* synth = app.add_subcommand("synth-blur", "synthesize local blur under a mask");
    synth->add_option("--input", input)->required();
    synth->add_option("--mask", pred_mask_path)->required();
    synth->add_option("--mode", mode, "translation | rotation");
    synth->add_option("--steps", steps);
    synth->add_option("--magnitude", magnitude, "px of travel or degrees");
    synth->add_option("--direction", direction, "translation direction, degrees");
    synth->add_flag("--no-kernel", no_kernel);
    synth->add_flag("--kernel-first", kernel_first);
    synth->add_option("--out", out_path)->required();
    synth->add_option("--out-mask", out_mask);

    auto* crop_cmd = app.add_subcommand("crop", "blur-aware patch sampling manifest");
    crop_cmd->add_option("--mask", pred_mask_path)->required();
    crop_cmd->add_option("--count", count);
    crop_cmd->add_option("--seed", seed);
    crop_cmd->add_option("--size", size);
    crop_cmd->add_flag("--augment", with_augment, "add flip augmentation flags");
    crop_cmd->add_option("--out", out_path)->required();

    auto* evaluate = app.add_subcommand("evaluate", "score (reference, test, mask) triples");
    evaluate->add_option("--manifest", manifest_path)->required();
    evaluate->add_option("--report", report_path);
    evaluate->add_option("--radius", radius, "aligned PSNR search radius");

    auto* loss_check = app.add_subcommand("loss-check", "loss breakdown and gradient checks");
    loss_check->add_option("--pred", pred_path)->required();
    loss_check->add_option("--gt", gt_path)->required();
    loss_check->add_option("--pred-mask", pred_mask_path);
    loss_check->add_option("--gt-mask", gt_mask_path);
    loss_check->add_option("--report", report_path);

    auto* pipeline = app.add_subcommand("pipeline", "color, photometric, ISP and geometric stages");
    pipeline->add_option("--manifest", manifest_path)->required();
    pipeline->add_option("--out", out_path, "output directory")->required();
    pipeline->add_option("--report", report_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, g);
        if (calibrate->parsed())
            return cmd_calibrate_color(input, out_path, grid_cols, grid_rows, report_path, g);
        if (correct->parsed()) return cmd_correct(input, calib_path, out_path);
        if (align_cmd->parsed()) return cmd_align(manifest_path, out_path, report_path, g);
        if (gen_mask->parsed())
            return cmd_gen_mask(manifest_path, target_id, out_path, report_path, g);
        if (synth->parsed())
            return cmd_synth_blur(input, pred_mask_path, mode, steps, magnitude, direction,
                                  no_kernel, kernel_first, out_path, out_mask, g);
        if (crop_cmd->parsed()) return cmd_crop(pred_mask_path, count, seed, size, with_augment, out_path);
        if (evaluate->parsed()) return cmd_evaluate(manifest_path, report_path, radius, g);
        if (loss_check->parsed())
            return cmd_loss_check(pred_path, gt_path, pred_mask_path, gt_mask_path, report_path, g);
        if (pipeline->parsed()) return cmd_pipeline(manifest_path, out_path, report_path, g);
        throw Error(Error::Kind::usage, "no command selected");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == Error::Kind::usage ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
