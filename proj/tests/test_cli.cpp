// End-to-end exercises of the installed command line: every subcommand
// runs against a small simulated scene in a scratch directory.

#include "lbtk/image_io.hpp"
#include "lbtk/manifest.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using lbtk::Json;

namespace {

#ifndef LBTK_BIN_DEFAULT
#define LBTK_BIN_DEFAULT "lbtk"
#endif

std::string binary() {
    if (const char* env = std::getenv("LBTK_BIN")) return env;
    return LBTK_BIN_DEFAULT;
}

const fs::path& sandbox() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "lbtk_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Scene shared by the pipeline-dependent cases.
const fs::path& scene_dir() {
    static const fs::path dir = [] {
        const fs::path d = sandbox() / "scene";
        const int rc = run("simulate --out " + d.string() +
                           " --width 256 --height 192 --frames 8 --pairs 2 --seed 21"
                           " --sprite-size 40 --travel 16 --sprite square");
        REQUIRE(rc == 0);
        return d;
    }();
    return dir;
}

const fs::path& processed_dir() {
    static const fs::path dir = [] {
        const fs::path d = sandbox() / "processed";
        const int rc = run("pipeline --manifest " + (scene_dir() / "manifest.json").string() +
                           " --out " + d.string() + " --report " +
                           (sandbox() / "pipeline_report.json").string() + " --no-timestamp");
        REQUIRE(rc == 0);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("") == 1);
    CHECK(run("no-such-command") == 1);
    CHECK(run("pipeline") == 1);  // missing required flags
}

TEST_CASE("data errors exit with code 2") {
    CHECK(run("pipeline --manifest /nonexistent/manifest.json --out " +
              (sandbox() / "x").string()) == 2);
    CHECK(run("evaluate --manifest /nonexistent/eval.json") == 2);
}

TEST_CASE("simulate writes a complete scene package") {
    const fs::path d = scene_dir();
    CHECK(fs::exists(d / "manifest.json"));
    CHECK(fs::exists(d / "wb_blur.png"));
    CHECK(fs::exists(d / "wb_blur.png.meta"));
    CHECK(fs::exists(d / "ref_sharp.png"));
    CHECK(fs::exists(d / "pair_0000_blur.png"));
    CHECK(fs::exists(d / "pair_0001_mask.png"));

    const auto m = lbtk::SceneManifest::load((d / "manifest.json").string());
    CHECK(m.domain == "raw");
    CHECK(m.pairs.size() == 2);
    CHECK(m.has_whiteboard());
    CHECK(m.has_reference());
    CHECK(!m.ground_truth.is_null());
}

TEST_CASE("pipeline improves the reference pair and emits an RGB manifest") {
    const fs::path d = processed_dir();
    const Json report = lbtk::read_json((sandbox() / "pipeline_report.json").string());
    const auto& ref = report.at("reference");
    CHECK(ref.at("delta_l_after").get<double>() <= ref.at("delta_l_before").get<double>());
    CHECK(ref.at("geo_error_after").get<double>() <= 1.0);
    CHECK(ref.at("psnr_after").get<double>() > ref.at("psnr_before").get<double>());

    const auto out = lbtk::SceneManifest::load((d / "manifest.json").string());
    CHECK(out.domain == "rgb");
    CHECK(out.pairs.size() == 2);
    CHECK(fs::exists(d / "flow.pfm"));
}

TEST_CASE("reports are byte identical without timestamps") {
    (void)processed_dir();
    const fs::path again = sandbox() / "processed_again";
    const int rc = run("pipeline --manifest " + (scene_dir() / "manifest.json").string() +
                       " --out " + again.string() + " --report " +
                       (sandbox() / "pipeline_report2.json").string() + " --no-timestamp");
    REQUIRE(rc == 0);
    CHECK(slurp(sandbox() / "pipeline_report.json") ==
          slurp(sandbox() / "pipeline_report2.json"));
}

TEST_CASE("calibrate-color and correct flatten the whiteboard") {
    const fs::path calib = sandbox() / "wb_calib.json";
    CHECK(run("calibrate-color --input " + (scene_dir() / "wb_blur.png").string() + " --out " +
              calib.string()) == 0);
    const fs::path corrected = sandbox() / "wb_corrected.png";
    CHECK(run("correct --input " + (scene_dir() / "wb_blur.png").string() + " --calib " +
              calib.string() + " --out " + corrected.string()) == 0);

    const lbtk::BayerImage wb = lbtk::load_bayer(corrected.string());
    // A corrected flat field is flat per channel (channels keep their
    // distinct brightness gains until photometric alignment).
    float lo[3] = {1, 1, 1}, hi[3] = {0, 0, 0};
    for (int y = 40; y < 150; ++y)
        for (int x = 60; x < 200; ++x) {
            const int c = wb.channel_at(x, y);
            lo[c] = std::min(lo[c], wb.at(x, y));
            hi[c] = std::max(hi[c], wb.at(x, y));
        }
    for (int c = 0; c < 3; ++c) CHECK(hi[c] - lo[c] < 0.02f);
}

TEST_CASE("gen-mask emits binary masks for each target") {
    (void)processed_dir();
    const fs::path out = sandbox() / "masks";
    CHECK(run("gen-mask --manifest " + (processed_dir() / "manifest.json").string() +
              " --out " + out.string() + " --report " +
              (sandbox() / "mask_report.json").string() + " --no-timestamp") == 0);
    const lbtk::BlurMask mask = lbtk::load_mask_png((out / "mask_0000.png").string());
    CHECK(mask.is_binary());
    CHECK(mask.width() == 256);
    const Json report = lbtk::read_json((sandbox() / "mask_report.json").string());
    CHECK(report.at("masks").size() == 2);
}

TEST_CASE("align warps pairs of an RGB manifest") {
    (void)processed_dir();
    const fs::path out = sandbox() / "aligned";
    CHECK(run("align --manifest " + (processed_dir() / "manifest.json").string() + " --out " +
              out.string() + " --report " + (sandbox() / "align_report.json").string() +
              " --no-timestamp") == 0);
    CHECK(fs::exists(out / "flow.pfm"));
    CHECK(fs::exists(out / "pair_0000_blur_aligned.png"));
}

TEST_CASE("synth-blur blurs under a mask and reports the footprint") {
    (void)processed_dir();
    const fs::path out = sandbox() / "synth.png";
    CHECK(run("synth-blur --input " + (processed_dir() / "pair_0000_sharp_processed.png").string() +
              " --mask " + (scene_dir() / "pair_0000_mask.png").string() +
              " --mode translation --steps 5 --magnitude 6 --out " + out.string() +
              " --out-mask " + (sandbox() / "synth_mask.png").string()) == 0);
    CHECK(fs::exists(out));
    CHECK(lbtk::load_mask_png((sandbox() / "synth_mask.png").string()).area() > 0.0);
}

TEST_CASE("crop emits deterministic JSON-lines patch manifests") {
    const fs::path patches = sandbox() / "patches.jsonl";
    const std::string cmd = "crop --mask " + (scene_dir() / "pair_0000_mask.png").string() +
                            " --count 32 --seed 9 --size 64 --augment --out ";
    CHECK(run(cmd + patches.string()) == 0);
    const fs::path again = sandbox() / "patches2.jsonl";
    CHECK(run(cmd + again.string()) == 0);
    CHECK(slurp(patches) == slurp(again));
    int lines = 0;
    std::istringstream ss(slurp(patches));
    std::string line;
    while (std::getline(ss, line)) {
        const Json j = Json::parse(line);
        CHECK(j.contains("x"));
        CHECK(j.at("size").get<int>() == 64);
        ++lines;
    }
    CHECK(lines == 32);
}

TEST_CASE("evaluate on identical images caps the metrics") {
    (void)processed_dir();
    const std::string sharp = (processed_dir() / "pair_0000_sharp_processed.png").string();
    Json manifest;
    manifest["kind"] = "evaluation_manifest";
    manifest["entries"] = Json::array();
    manifest["entries"].push_back({{"id", "self"},
                                   {"reference", sharp},
                                   {"test", sharp},
                                   {"mask", (scene_dir() / "pair_0000_mask.png").string()}});
    const fs::path mpath = sandbox() / "eval_manifest.json";
    lbtk::write_json(manifest, mpath.string());
    CHECK(run("evaluate --manifest " + mpath.string() + " --radius 3 --report " +
              (sandbox() / "eval_report.json").string() + " --no-timestamp") == 0);
    const Json report = lbtk::read_json((sandbox() / "eval_report.json").string());
    const auto& row = report.at("pairs").at(0);
    CHECK(row.at("psnr").get<double>() == 100.0);
    CHECK(row.at("ssim").get<double>() == 1.0);
    CHECK(row.at("psnr_a").get<double>() == 100.0);
}

TEST_CASE("loss-check reports term breakdown and gradient checks") {
    (void)processed_dir();
    CHECK(run("loss-check --pred " + (processed_dir() / "pair_0000_blur_processed.png").string() +
              " --gt " + (processed_dir() / "pair_0000_sharp_processed.png").string() +
              " --report " + (sandbox() / "loss_report.json").string() + " --no-timestamp") == 0);
    const Json report = lbtk::read_json((sandbox() / "loss_report.json").string());
    CHECK(report.at("terms").contains("total"));
    CHECK(report.at("terms").at("ssim").get<double>() >= -1.0);
    CHECK(report.at("grad_check").at("mse").at("max_rel_error").get<double>() < 1e-4);
    CHECK(report.at("grad_check").at("msfr").at("checked").get<int>() > 0);
}

}  // TEST_SUITE
