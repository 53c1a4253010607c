#include "sprayeval/report/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "sprayeval/errors.hpp"

namespace sprayeval {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
    // unwinds through libpng's C frames; the structs are released by the owner
    (void)png;
    throw FormatError(std::string("png: ") + message);
}

void png_warn(png_structp, png_const_charp) {}

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + ": not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    Raster r;
    try {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const auto color = png_get_color_type(png, info);
        const auto depth = png_get_bit_depth(png, info);
        if (depth == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);
        r.height = png_get_image_height(png, info);
        r.width = png_get_image_width(png, info);
        r.channels = png_get_channels(png, info);
        if (r.channels != 1 && r.channels != 3) throw FormatError(path.string() + ": unsupported PNG layout");
        r.pixels.resize(static_cast<std::size_t>(r.height * r.width * r.channels));
        std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
        for (Index y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = &r.pixels[static_cast<std::size_t>(y * r.width * r.channels)];
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (const FormatError& e) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": " + e.what());
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return r;
}

void write_png(const Raster& r, const std::filesystem::path& path) {
    if (r.channels != 1 && r.channels != 3) throw ArgumentError("write_png: 1 or 3 channels");
    if (r.pixels.size() != static_cast<std::size_t>(r.height * r.width * r.channels)) {
        throw ArgumentError("write_png: pixel buffer size mismatch");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
                     r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (Index y = 0; y < r.height; ++y) {
            png_write_row(png, &r.pixels[static_cast<std::size_t>(y * r.width * r.channels)]);
        }
        png_write_end(png, nullptr);
    } catch (const FormatError& e) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path.string() + ": " + e.what());
    }
    png_destroy_write_struct(&png, &info);
}

Tensor read_png_image(const std::filesystem::path& path) {
    const Raster r = read_png(path);
    Tensor t(3, r.height, r.width);
    for (Index y = 0; y < r.height; ++y)
        for (Index x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) t(c, y, x) = r.at(y, x, r.channels == 3 ? c : 0) / 255.0f;
    return t;
}

LabelMask read_png_mask(const std::filesystem::path& path, int num_classes) {
    const Raster r = read_png(path);
    if (r.channels != 1) throw FormatError(path.string() + ": label PNG must be single-channel");
    LabelMask::Matrix m(r.height, r.width);
    std::copy(r.pixels.begin(), r.pixels.end(), m.data());
    try {
        return LabelMask(std::move(m), num_classes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Raster to_raster(const Tensor& image) {
    if (image.rank() != 3 || image.channels() != 3) throw ArgumentError("to_raster: expected (3, H, W)");
    Raster r{image.height(), image.width(), 3, {}};
    r.pixels.resize(static_cast<std::size_t>(r.height * r.width * 3));
    for (Index y = 0; y < r.height; ++y)
        for (Index x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) r.at(y, x, c) = to_byte(image(c, y, x));
    return r;
}

Raster gray_raster(const Tensor& plane) {
    Raster r{plane.height(), plane.width(), 1, {}};
    r.pixels.resize(static_cast<std::size_t>(r.height * r.width));
    for (Index i = 0; i < plane.size(); ++i) r.pixels[static_cast<std::size_t>(i)] = to_byte(plane.data()[i]);
    return r;
}

}  // namespace sprayeval
