#pragma once

#include <array>
#include <string>
#include <vector>

#include "sprayeval/cam.hpp"

namespace sprayeval {

inline constexpr int kCurveSteps = 100;  // 1% increments, 101 samples

enum class CurveKind { deletion, insertion };

std::string to_string(CurveKind k);

struct FaithfulnessCurve {
    CurveKind kind = CurveKind::deletion;
    std::array<double, kCurveSteps + 1> confidences{};

    static double fraction(int step) { return static_cast<double>(step) / kCurveSteps; }
};

/// Pixel indices sorted by descending saliency; ties keep row-major order.
std::vector<Index> morf_order(const Tensor& cam_map);
inline std::vector<Index> morf_order(const Cam& cam) { return morf_order(cam.map); }

/// Number of pixels perturbed at a given 1% step: floor(step * N / 100).
inline Index pixels_at_step(int step, Index pixel_count) { return static_cast<Index>(step) * pixel_count / kCurveSteps; }

/// Zeroes pixels in MoRF order and records the fixed-region target score.
FaithfulnessCurve deletion_curve(InferenceEngine& engine, const Tensor& image, const Tensor& cam_map, int class_id,
                                 const FusionConfig& fusion);
/// Starts from black and restores pixels in MoRF order.
FaithfulnessCurve insertion_curve(InferenceEngine& engine, const Tensor& image, const Tensor& cam_map, int class_id,
                                  const FusionConfig& fusion);

/// Composite trapezoidal rule with h = 1/100 on the normalized fraction axis.
double auc(std::span<const double> confidences);
inline double auc(const FaithfulnessCurve& curve) { return auc(curve.confidences); }

struct ClassAverage {
    double mean_deletion = 0.0;
    double mean_insertion = 0.0;
    bool interpretable = false;  // strict: deletion < insertion
    double difference() const { return mean_insertion - mean_deletion; }
};

struct AucPair {
    double deletion = 0.0;
    double insertion = 0.0;
};

/// Throws ArgumentError on an empty list (no classes present).
ClassAverage class_averaged_scores(std::span<const AucPair> per_class);

}  // namespace sprayeval
