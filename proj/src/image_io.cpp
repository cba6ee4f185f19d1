#include "lbtk/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace lbtk {

const char* bayer_pattern_name(BayerPattern p) {
    switch (p) {
        case BayerPattern::RGGB: return "RGGB";
        case BayerPattern::BGGR: return "BGGR";
        case BayerPattern::GRBG: return "GRBG";
        case BayerPattern::GBRG: return "GBRG";
    }
    fail("unknown Bayer pattern");
}

BayerPattern bayer_pattern_from_name(const std::string& name) {
    if (name == "RGGB") return BayerPattern::RGGB;
    if (name == "BGGR") return BayerPattern::BGGR;
    if (name == "GRBG") return BayerPattern::GRBG;
    if (name == "GBRG") return BayerPattern::GBRG;
    fail("unknown Bayer pattern name: " + name);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadState() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteState() { png_destroy_write_struct(&png, &info); }
};

void png_error_handler(png_structp png, png_const_charp msg) {
    throw Error(Error::Kind::data, std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct DecodedPng {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint16_t> samples;  // interleaved, already byte-swapped
};

DecodedPng decode_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    require(fp != nullptr, "cannot open file: " + path);

    png_byte header[8];
    require(std::fread(header, 1, 8, fp.get()) == 8 && !png_sig_cmp(header, 0, 8),
            "not a PNG file: " + path);

    PngReadState st;
    st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                    png_warning_handler);
    require(st.png != nullptr, "png reader allocation failed");
    st.info = png_create_info_struct(st.png);
    require(st.info != nullptr, "png info allocation failed");

    png_init_io(st.png, fp.get());
    png_set_sig_bytes(st.png, 8);
    png_read_info(st.png, st.info);

    const int bit_depth = png_get_bit_depth(st.png, st.info);
    const int color_type = png_get_color_type(st.png, st.info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st.png);
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
    if (png_get_valid(st.png, st.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(st.png);
    if (bit_depth == 16 && std::endian::native == std::endian::little)
        png_set_swap(st.png);
    png_read_update_info(st.png, st.info);

    DecodedPng out;
    out.width = static_cast<int>(png_get_image_width(st.png, st.info));
    out.height = static_cast<int>(png_get_image_height(st.png, st.info));
    out.channels = png_get_channels(st.png, st.info);
    out.bit_depth = png_get_bit_depth(st.png, st.info);
    require(out.channels == 1 || out.channels == 3 || out.channels == 4,
            "unsupported PNG channel count in " + path);

    const size_t row_samples = size_t(out.width) * out.channels;
    out.samples.resize(size_t(out.height) * row_samples);
    std::vector<png_bytep> rows(out.height);

    if (out.bit_depth == 16) {
        for (int y = 0; y < out.height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(out.samples.data() + size_t(y) * row_samples);
        png_read_image(st.png, rows.data());
    } else {
        std::vector<std::uint8_t> bytes(size_t(out.height) * row_samples);
        for (int y = 0; y < out.height; ++y) rows[y] = bytes.data() + size_t(y) * row_samples;
        png_read_image(st.png, rows.data());
        for (size_t i = 0; i < bytes.size(); ++i)
            out.samples[i] = std::uint16_t(bytes[i]) * 257;  // 8-bit -> 16-bit
    }
    png_read_end(st.png, nullptr);
    return out;
}

void encode_png16(const std::string& path, int width, int height, int channels,
                  const std::vector<std::uint16_t>& samples) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    require(fp != nullptr, "cannot open file for writing: " + path);

    PngWriteState st;
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                     png_warning_handler);
    require(st.png != nullptr, "png writer allocation failed");
    st.info = png_create_info_struct(st.png);
    require(st.info != nullptr, "png info allocation failed");

    int color_type = PNG_COLOR_TYPE_GRAY;
    if (channels == 3) color_type = PNG_COLOR_TYPE_RGB;
    if (channels == 4) color_type = PNG_COLOR_TYPE_RGBA;

    png_init_io(st.png, fp.get());
    png_set_IHDR(st.png, st.info, width, height, 16, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st.png, st.info);
    if (std::endian::native == std::endian::little) png_set_swap(st.png);

    const size_t row_samples = size_t(width) * channels;
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(samples.data() + size_t(y) * row_samples));
    png_write_image(st.png, rows.data());
    png_write_end(st.png, nullptr);
}

std::uint16_t quantize16(float v) {
    const float c = std::min(std::max(v, 0.0f), 1.0f);
    return static_cast<std::uint16_t>(std::lround(double(c) * 65535.0));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Image load_png16(const std::string& path) {
    const DecodedPng d = decode_png(path);
    Image img(d.width, d.height, d.channels);
    for (int c = 0; c < d.channels; ++c) {
        auto& p = img.plane(c);
        for (int y = 0; y < d.height; ++y)
            for (int x = 0; x < d.width; ++x)
                p(y, x) = float(d.samples[(size_t(y) * d.width + x) * d.channels + c]) / 65535.0f;
    }
    return img;
}

void save_png16(const Image& img, const std::string& path) {
    require(!img.empty(), "cannot save empty image");
    require(img.all_finite(), "cannot save non-finite image");
    std::vector<std::uint16_t> samples(size_t(img.pixel_count()) * img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto& p = img.plane(c);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                samples[(size_t(y) * img.width() + x) * img.channels() + c] = quantize16(p(y, x));
    }
    encode_png16(path, img.width(), img.height(), img.channels(), samples);
}

BlurMask load_mask_png(const std::string& path) {
    const DecodedPng d = decode_png(path);
    require(d.channels == 1, "mask PNG must be single-channel: " + path);
    Plane p(d.height, d.width);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            p(y, x) = d.samples[size_t(y) * d.width + x] >= 32768 ? 1.0f : 0.0f;
    return BlurMask(std::move(p));
}

void save_mask_png(const BlurMask& mask, const std::string& path) {
    require(!mask.empty(), "cannot save empty mask");
    std::vector<std::uint16_t> samples(size_t(mask.width()) * mask.height());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            samples[size_t(y) * mask.width() + x] = mask.at(x, y) >= 0.5f ? 65535 : 0;
    encode_png16(path, mask.width(), mask.height(), 1, samples);
}

Image load_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open file: " + path);
    std::string magic;
    f >> magic;
    require(magic == "PF" || magic == "Pf", "not a PFM file: " + path);
    const int channels = magic == "PF" ? 3 : 1;
    int width = 0, height = 0;
    double scale = 0.0;
    f >> width >> height >> scale;
    require(f.good() && width > 0 && height > 0 && scale != 0.0,
            "malformed PFM header: " + path);
    f.get();  // single whitespace after the header

    const bool little_endian = scale < 0.0;
    require(little_endian, "big-endian PFM not supported: " + path);

    const size_t count = size_t(width) * height * channels;
    std::vector<float> buf(count);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(count * sizeof(float)));
    require(f.gcount() == std::streamsize(count * sizeof(float)),
            "truncated PFM payload: " + path);

    // PFM stores rows bottom-up.
    Image img(width, height, channels);
    for (int c = 0; c < channels; ++c) {
        auto& p = img.plane(c);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                p(y, x) = buf[(size_t(height - 1 - y) * width + x) * channels + c];
    }
    require(img.all_finite(), "PFM contains non-finite samples: " + path);
    return img;
}

void save_pfm(const Image& img, const std::string& path) {
    require(!img.empty(), "cannot save empty image");
    require(img.channels() == 1 || img.channels() == 3, "PFM supports 1 or 3 channels");
    require(img.all_finite(), "cannot save non-finite image");
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open file for writing: " + path);
    f << (img.channels() == 3 ? "PF" : "Pf") << "\n"
      << img.width() << " " << img.height() << "\n"
      << "-1.0\n";
    std::vector<float> buf(size_t(img.pixel_count()) * img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto& p = img.plane(c);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                buf[(size_t(img.height() - 1 - y) * img.width() + x) * img.channels() + c] =
                    p(y, x);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    require(f.good(), "write failed: " + path);
}

BayerSidecar load_sidecar(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open sidecar: " + path);
    BayerSidecar sc;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key.empty() || key[0] == '#') continue;
        if (key == "pattern") {
            std::string v;
            require(bool(ls >> v), "sidecar pattern missing value");
            sc.pattern = bayer_pattern_from_name(v);
        } else if (key == "black_level") {
            require(bool(ls >> sc.black_level), "sidecar black_level missing value");
        } else if (key == "white_level") {
            require(bool(ls >> sc.white_level), "sidecar white_level missing value");
        }
    }
    require(sc.white_level > sc.black_level, "sidecar levels invalid");
    return sc;
}

void save_sidecar(const BayerSidecar& sidecar, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open sidecar for writing: " + path);
    f << "pattern " << bayer_pattern_name(sidecar.pattern) << "\n"
      << "black_level " << sidecar.black_level << "\n"
      << "white_level " << sidecar.white_level << "\n";
}

BayerImage load_bayer(const std::string& path) {
    const BayerSidecar sc = load_sidecar(path + ".meta");
    const DecodedPng d = decode_png(path);
    require(d.channels == 1, "Bayer mosaic PNG must be single-channel: " + path);
    require(d.width % 2 == 0 && d.height % 2 == 0, "Bayer mosaic dimensions must be even");
    Plane p(d.height, d.width);
    const double span = sc.white_level - sc.black_level;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) {
            const double v = (double(d.samples[size_t(y) * d.width + x]) - sc.black_level) / span;
            p(y, x) = float(std::min(std::max(v, 0.0), 1.0));
        }
    return BayerImage(std::move(p), sc.pattern);
}

void save_bayer(const BayerImage& raw, const std::string& path, const BayerSidecar& sidecar) {
    BayerSidecar sc = sidecar;
    sc.pattern = raw.pattern();
    const double span = sc.white_level - sc.black_level;
    std::vector<std::uint16_t> samples(size_t(raw.width()) * raw.height());
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) {
            const double v = sc.black_level + double(raw.at(x, y)) * span;
            samples[size_t(y) * raw.width() + x] =
                static_cast<std::uint16_t>(std::lround(std::min(std::max(v, 0.0), 65535.0)));
        }
    encode_png16(path, raw.width(), raw.height(), 1, samples);
    save_sidecar(sc, path + ".meta");
}

FlowField load_flow_pfm(const std::string& path) {
    const Image img = load_pfm(path);
    require(img.channels() == 3, "flow PFM must have 3 planes (u, v, confidence)");
    return FlowField(img.plane(0), img.plane(1), img.plane(2));
}

void save_flow_pfm(const FlowField& flow, const std::string& path) {
    Image img =
        Image::from_planes({flow.u_plane(), flow.v_plane(), flow.confidence_plane()});
    save_pfm(img, path);
}

Image load_image(const std::string& path) {
    if (ends_with(path, ".pfm")) return load_pfm(path);
    if (ends_with(path, ".png")) return load_png16(path);
    fail("unsupported image extension (need .png or .pfm): " + path);
}

void save_image(const Image& img, const std::string& path) {
    if (ends_with(path, ".pfm")) {
        save_pfm(img, path);
        return;
    }
    if (ends_with(path, ".png")) {
        save_png16(img, path);
        return;
    }
    fail("unsupported image extension (need .png or .pfm): " + path);
}

}  // namespace lbtk
