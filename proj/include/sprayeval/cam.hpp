#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sprayeval/engine.hpp"
#include "sprayeval/fusion.hpp"

namespace sprayeval {

enum class CamMethod { ablation, score };

CamMethod parse_cam_method(std::string_view s);
std::string to_string(CamMethod m);

/// Class activation map at input resolution, values in [0, 1].
struct Cam {
    Tensor map;  // rank 2, H x W
    int class_id = 0;
    CamMethod method = CamMethod::ablation;
    /// Per-channel weights before clamping (ablation: relative score drop,
    /// score: softmax coefficient).
    std::vector<double> channel_weights;
};

/// Pixels predicted as class_id on the unperturbed image. The region stays
/// fixed while the image is perturbed.
struct TargetRegion {
    int class_id = 0;
    std::vector<Index> pixels;  // flat row-major indices

    static TargetRegion from_logits(const Tensor& fused_logits, int class_id);
    bool empty() const { return pixels.empty(); }
};

/// Mean softmax probability of the region's class over its pixels; 0 for an
/// empty region.
double target_score(const Tensor& logits, const TargetRegion& region);

/// Runs the engine and fuses main/aux according to cfg.
Tensor fused_logits(const ModelOutput& out, const FusionConfig& cfg);

Cam ablation_cam(InferenceEngine& engine, const Tensor& image, int class_id, const FusionConfig& fusion);
Cam score_cam(InferenceEngine& engine, const Tensor& image, int class_id, const FusionConfig& fusion);
Cam compute_cam(CamMethod method, InferenceEngine& engine, const Tensor& image, int class_id,
                const FusionConfig& fusion);

}  // namespace sprayeval
