#pragma once

#include <array>
#include <span>
#include <vector>

#include "sprayeval/report/png.hpp"
#include "sprayeval/wsde.hpp"

namespace sprayeval {

/// Colour of each dataset class in overlays.
std::array<std::uint8_t, 3> class_colour(int class_id);

/// Image blended half and half with the class colours of the prediction.
Raster prediction_overlay(const Tensor& image, const LabelMask& pred);

/// Image blended with a blue-to-red heat map of the CAM, island borders in
/// white, predicted keypoints as red crosses and GT keypoints as green squares.
Raster cam_overlay(const Tensor& image, const Tensor& cam_map, std::span<const Island> islands,
                   std::span<const PixelPoint> predicted, std::span<const PixelPoint> ground_truth);

}  // namespace sprayeval
