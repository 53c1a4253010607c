#include "sprayeval/cam.hpp"

#include <cmath>

namespace sprayeval {
namespace {

struct Baseline {
    ModelOutput output;
    TargetRegion region;
    double score = 0.0;
};

Baseline baseline(InferenceEngine& engine, const Tensor& image, int class_id, const FusionConfig& fusion) {
    if (image.rank() != 3) throw ArgumentError("CAM input must be a (3, H, W) image");
    Baseline b;
    b.output = engine.forward(image);
    const Tensor fused = fused_logits(b.output, fusion);
    if (class_id < 0 || class_id >= fused.channels()) throw ArgumentError("class id out of range");
    b.region = TargetRegion::from_logits(fused, class_id);
    b.score = target_score(fused, b.region);
    if (b.region.empty() || !(b.score > 0.0)) throw ClassAbsentError(class_id);
    return b;
}

Tensor to_plane(const Tensor::Array& values, Index h, Index w) { return Tensor({h, w}, values); }

}  // namespace

CamMethod parse_cam_method(std::string_view s) {
    if (s == "ablation") return CamMethod::ablation;
    if (s == "score") return CamMethod::score;
    throw ConfigError("unknown CAM method '" + std::string(s) + "'");
}

std::string to_string(CamMethod m) { return m == CamMethod::ablation ? "ablation" : "score"; }

TargetRegion TargetRegion::from_logits(const Tensor& fused_logits, int class_id) {
    TargetRegion r;
    r.class_id = class_id;
    const LabelMask pred = argmax_mask(fused_logits);
    for (Index i = 0; i < pred.size(); ++i) {
        if (pred.flat(i) == class_id) r.pixels.push_back(i);
    }
    return r;
}

double target_score(const Tensor& logits, const TargetRegion& region) {
    if (region.class_id < 0 || region.class_id >= logits.channels()) {
        throw ArgumentError("target class outside the logit channels");
    }
    if (region.pixels.empty()) return 0.0;
    const Index n = logits.plane_size();
    double total = 0.0;
    for (Index p : region.pixels) {
        double m = logits.data()[p];
        for (Index c = 1; c < logits.channels(); ++c) m = std::max(m, static_cast<double>(logits.data()[c * n + p]));
        double sum = 0.0;
        for (Index c = 0; c < logits.channels(); ++c) sum += std::exp(static_cast<double>(logits.data()[c * n + p]) - m);
        total += std::exp(static_cast<double>(logits.data()[region.class_id * n + p]) - m) / sum;
    }
    return total / static_cast<double>(region.pixels.size());
}

Tensor fused_logits(const ModelOutput& out, const FusionConfig& cfg) { return fuse(out.main, out.aux, cfg); }

Cam ablation_cam(InferenceEngine& engine, const Tensor& image, int class_id, const FusionConfig& fusion) {
    const Baseline base = baseline(engine, image, class_id, fusion);
    const Index h = image.height(), w = image.width();
    const Tensor up = bilinear_resize(base.output.activations, h, w);
    const Index k_count = up.channels();

    Cam cam;
    cam.class_id = class_id;
    cam.method = CamMethod::ablation;
    Tensor::Array raw = Tensor::Array::Zero(h * w);
    for (Index k = 0; k < k_count; ++k) {
        const ModelOutput ablated = engine.forward_ablated(image, AblationRequest({static_cast<std::uint32_t>(k)}));
        const double s_k = target_score(fused_logits(ablated, fusion), base.region);
        const double weight = (base.score - s_k) / base.score;
        cam.channel_weights.push_back(weight);
        if (weight > 0.0) raw += static_cast<float>(weight) * up.channel_flat(k);
    }
    cam.map = minmax_normalize(to_plane(raw.max(0.0f), h, w));
    return cam;
}

Cam score_cam(InferenceEngine& engine, const Tensor& image, int class_id, const FusionConfig& fusion) {
    const Baseline base = baseline(engine, image, class_id, fusion);
    const Index h = image.height(), w = image.width();
    const Tensor up = bilinear_resize(base.output.activations, h, w);
    const Index k_count = up.channels();

    std::vector<double> scores;
    for (Index k = 0; k < k_count; ++k) {
        const Tensor mask = minmax_normalize(to_plane(up.channel_flat(k), h, w));
        Tensor masked = image;
        for (Index c = 0; c < image.channels(); ++c) masked.channel_flat(c) *= mask.data();
        scores.push_back(target_score(fused_logits(engine.forward(masked), fusion), base.region));
    }

    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    std::vector<double> alpha(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) sum += alpha[k] = std::exp(scores[k] - top);
    for (double& a : alpha) a /= sum;

    Tensor::Array raw = Tensor::Array::Zero(h * w);
    for (Index k = 0; k < k_count; ++k) raw += static_cast<float>(alpha[static_cast<std::size_t>(k)]) * up.channel_flat(k);

    Cam cam;
    cam.class_id = class_id;
    cam.method = CamMethod::score;
    cam.channel_weights = alpha;
    cam.map = minmax_normalize(to_plane(raw.max(0.0f), h, w));
    return cam;
}

Cam compute_cam(CamMethod method, InferenceEngine& engine, const Tensor& image, int class_id,
                const FusionConfig& fusion) {
    return method == CamMethod::ablation ? ablation_cam(engine, image, class_id, fusion)
                                         : score_cam(engine, image, class_id, fusion);
}

}  // namespace sprayeval
