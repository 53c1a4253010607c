#include "sprayeval/faithfulness.hpp"

#include <algorithm>
#include <numeric>

namespace sprayeval {
namespace {

struct Reference {
    TargetRegion region;
    double score = 0.0;
};

Reference reference(InferenceEngine& engine, const Tensor& image, const Tensor& cam_map, int class_id,
                    const FusionConfig& fusion) {
    if (cam_map.height() != image.height() || cam_map.width() != image.width() || cam_map.channels() != 1) {
        throw ArgumentError("CAM and image resolutions differ");
    }
    const Tensor fused = fused_logits(engine.forward(image), fusion);
    Reference r{TargetRegion::from_logits(fused, class_id), 0.0};
    if (r.region.empty()) throw ClassAbsentError(class_id);
    r.score = target_score(fused, r.region);
    return r;
}

void copy_pixel(Tensor& dst, const Tensor& src, Index pixel) {
    const Index n = dst.plane_size();
    for (Index c = 0; c < dst.channels(); ++c) dst.data()[c * n + pixel] = src.data()[c * n + pixel];
}

void zero_pixel(Tensor& dst, Index pixel) {
    const Index n = dst.plane_size();
    for (Index c = 0; c < dst.channels(); ++c) dst.data()[c * n + pixel] = 0.0f;
}

}  // namespace

std::string to_string(CurveKind k) { return k == CurveKind::deletion ? "deletion" : "insertion"; }

std::vector<Index> morf_order(const Tensor& cam_map) {
    std::vector<Index> order(static_cast<std::size_t>(cam_map.size()));
    std::iota(order.begin(), order.end(), Index{0});
    const auto& v = cam_map.data();
    std::stable_sort(order.begin(), order.end(), [&v](Index a, Index b) { return v[a] > v[b]; });
    return order;
}

FaithfulnessCurve deletion_curve(InferenceEngine& engine, const Tensor& image, const Tensor& cam_map, int class_id,
                                 const FusionConfig& fusion) {
    const Reference ref = reference(engine, image, cam_map, class_id, fusion);
    const auto order = morf_order(cam_map);
    const Index n = image.plane_size();

    FaithfulnessCurve curve;
    curve.kind = CurveKind::deletion;
    curve.confidences[0] = ref.score;
    Tensor work = image;
    Index done = 0;
    for (int step = 1; step <= kCurveSteps; ++step) {
        const Index target = pixels_at_step(step, n);
        for (; done < target; ++done) zero_pixel(work, order[static_cast<std::size_t>(done)]);
        curve.confidences[static_cast<std::size_t>(step)] =
            target_score(fused_logits(engine.forward(work), fusion), ref.region);
    }
    return curve;
}

FaithfulnessCurve insertion_curve(InferenceEngine& engine, const Tensor& image, const Tensor& cam_map, int class_id,
                                  const FusionConfig& fusion) {
    const Reference ref = reference(engine, image, cam_map, class_id, fusion);
    const auto order = morf_order(cam_map);
    const Index n = image.plane_size();

    FaithfulnessCurve curve;
    curve.kind = CurveKind::insertion;
    Tensor work(image.shape(), Tensor::Array::Zero(image.size()));
    Index done = 0;
    for (int step = 0; step <= kCurveSteps; ++step) {
        const Index target = pixels_at_step(step, n);
        for (; done < target; ++done) copy_pixel(work, image, order[static_cast<std::size_t>(done)]);
        curve.confidences[static_cast<std::size_t>(step)] =
            target_score(fused_logits(engine.forward(work), fusion), ref.region);
    }
    return curve;
}

double auc(std::span<const double> y) {
    if (y.size() != kCurveSteps + 1) throw ArgumentError("faithfulness curve must have 101 samples");
    const double h = 1.0 / kCurveSteps;
    double inner = 0.0;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) inner += y[i];
    return h / 2.0 * (y.front() + 2.0 * inner + y.back());
}

ClassAverage class_averaged_scores(std::span<const AucPair> per_class) {
    if (per_class.empty()) throw ArgumentError("no classes to average");
    ClassAverage a;
    for (const auto& p : per_class) {
        a.mean_deletion += p.deletion;
        a.mean_insertion += p.insertion;
    }
    a.mean_deletion /= static_cast<double>(per_class.size());
    a.mean_insertion /= static_cast<double>(per_class.size());
    a.interpretable = a.mean_deletion < a.mean_insertion;
    return a;
}

}  // namespace sprayeval
