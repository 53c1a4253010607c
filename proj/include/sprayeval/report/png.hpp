#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

/// 8-bit raster, interleaved channels, row-major.
struct Raster {
    Index height = 0;
    Index width = 0;
    int channels = 3;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(Index y, Index x, int c) {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
    std::uint8_t at(Index y, Index x, int c) const {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
};

/// Decodes any PNG to 8-bit gray or RGB (alpha dropped, palettes expanded).
Raster read_png(const std::filesystem::path& path);
void write_png(const Raster& raster, const std::filesystem::path& path);

/// RGB PNG -> (3, H, W) tensor in [0, 1].
Tensor read_png_image(const std::filesystem::path& path);
/// Grayscale PNG whose pixel values are class ids.
LabelMask read_png_mask(const std::filesystem::path& path, int num_classes = kDatasetClassCount);

Raster to_raster(const Tensor& image);  // (3, H, W) in [0, 1], clamped
Raster gray_raster(const Tensor& plane);  // (H, W) in [0, 1], clamped

}  // namespace sprayeval
