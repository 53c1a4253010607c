#include "sprayeval/report/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace sprayeval {
namespace {

void put(Raster& r, Index y, Index x, std::array<std::uint8_t, 3> rgb) {
    if (y < 0 || x < 0 || y >= r.height || x >= r.width) return;
    for (int c = 0; c < 3; ++c) r.at(y, x, c) = rgb[static_cast<std::size_t>(c)];
}

std::uint8_t blend(std::uint8_t a, double b, double alpha) {
    return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * a + alpha * b));
}

}  // namespace

std::array<std::uint8_t, 3> class_colour(int class_id) {
    static constexpr std::array<std::array<std::uint8_t, 3>, kDatasetClassCount> palette{{
        {0, 0, 0}, {60, 180, 75}, {255, 225, 25}, {245, 130, 48}, {0, 130, 200}, {145, 30, 180}, {70, 240, 240},
    }};
    return palette[static_cast<std::size_t>(std::clamp(class_id, 0, kDatasetClassCount - 1))];
}

Raster prediction_overlay(const Tensor& image, const LabelMask& pred) {
    Raster r = to_raster(image);
    for (Index y = 0; y < r.height; ++y)
        for (Index x = 0; x < r.width; ++x) {
            const int c = pred(y, x);
            if (c == 0) continue;
            const auto col = class_colour(c);
            for (int ch = 0; ch < 3; ++ch) r.at(y, x, ch) = blend(r.at(y, x, ch), col[static_cast<std::size_t>(ch)], 0.5);
        }
    return r;
}

Raster cam_overlay(const Tensor& image, const Tensor& cam_map, std::span<const Island> islands,
                   std::span<const PixelPoint> predicted, std::span<const PixelPoint> ground_truth) {
    Raster r = to_raster(image);
    for (Index y = 0; y < r.height; ++y)
        for (Index x = 0; x < r.width; ++x) {
            const double v = std::clamp(static_cast<double>(cam_map.at(y, x)), 0.0, 1.0);
            const double heat[3] = {255.0 * v, 255.0 * (1.0 - std::abs(2.0 * v - 1.0)), 255.0 * (1.0 - v)};
            for (int ch = 0; ch < 3; ++ch) r.at(y, x, ch) = blend(r.at(y, x, ch), heat[ch], 0.5);
        }

    std::vector<int> label(static_cast<std::size_t>(r.height * r.width), 0);
    for (std::size_t i = 0; i < islands.size(); ++i)
        for (Index p : islands[i].pixels) label[static_cast<std::size_t>(p)] = static_cast<int>(i) + 1;
    auto at = [&](Index y, Index x) {
        if (y < 0 || x < 0 || y >= r.height || x >= r.width) return 0;
        return label[static_cast<std::size_t>(y * r.width + x)];
    };
    for (Index y = 0; y < r.height; ++y)
        for (Index x = 0; x < r.width; ++x) {
            const int l = at(y, x);
            if (l != 0 && (at(y - 1, x) != l || at(y + 1, x) != l || at(y, x - 1) != l || at(y, x + 1) != l)) {
                put(r, y, x, {255, 255, 255});
            }
        }

    for (const auto& p : ground_truth)
        for (int d = -2; d <= 2; ++d) {
            put(r, p.row - 2, p.col + d, {0, 255, 0});
            put(r, p.row + 2, p.col + d, {0, 255, 0});
            put(r, p.row + d, p.col - 2, {0, 255, 0});
            put(r, p.row + d, p.col + 2, {0, 255, 0});
        }
    for (const auto& p : predicted)
        for (int d = -2; d <= 2; ++d) {
            put(r, p.row + d, p.col + d, {255, 0, 0});
            put(r, p.row + d, p.col - d, {255, 0, 0});
        }
    return r;
}

}  // namespace sprayeval
