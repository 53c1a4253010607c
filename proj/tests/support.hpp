#pragma once

// Test-only helpers: random generators, a planted-signal engine and synthetic
// WSDE scenes. Nothing here calls into the code paths it is used to check.

#include <cmath>
#include <random>
#include <vector>

#include "sprayeval/engine.hpp"
#include "sprayeval/wsde.hpp"

namespace sprayeval::testing {

inline Tensor random_tensor(std::mt19937_64& rng, std::vector<Index> shape, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    Index n = 1;
    for (Index e : shape) n *= e;
    Tensor::Array data(n);
    for (Index i = 0; i < n; ++i) data[i] = u(rng);
    return Tensor(std::move(shape), std::move(data));
}

inline LabelMask random_mask(std::mt19937_64& rng, Index h, Index w, int classes = kDatasetClassCount) {
    std::uniform_int_distribution<int> u(0, classes - 1);
    LabelMask::Matrix m(h, w);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(u(rng));
    return LabelMask(std::move(m), classes);
}

/// Two-class engine whose class-1 logit at every pixel is gain * (mean
/// intensity inside a fixed square); class 0 stays at zero.
class PlantedSignalEngine final : public InferenceEngine {
public:
    PlantedSignalEngine(Index top, Index left, Index side, float gain = 8.0f)
        : top_(top), left_(left), side_(side), gain_(gain) {}

    ModelOutput forward_ablated(const Tensor& image, const AblationRequest&) override {
        double sum = 0.0;
        for (Index c = 0; c < image.channels(); ++c)
            for (Index y = top_; y < top_ + side_; ++y)
                for (Index x = left_; x < left_ + side_; ++x) sum += image(c, y, x);
        const double mean = sum / static_cast<double>(image.channels() * side_ * side_);
        ModelOutput out;
        out.main = Tensor(2, image.height(), image.width());
        out.main.channel_flat(1).setConstant(static_cast<float>(gain_ * mean));
        out.aux = out.main;
        out.activations = Tensor(1, image.height(), image.width());
        out.activations.channel_flat(0) = image.channel_flat(0);
        return out;
    }

    EngineDescriptor descriptor() const override { return {2, 1, "planted"}; }

    Tensor saliency(Index h, Index w, bool inverted) const {
        Tensor s = Tensor::plane(h, w);
        for (Index y = 0; y < h; ++y)
            for (Index x = 0; x < w; ++x) {
                const bool inside = y >= top_ && y < top_ + side_ && x >= left_ && x < left_ + side_;
                s.at(y, x) = (inside != inverted) ? 1.0f : 0.0f;
            }
        return s;
    }

private:
    Index top_, left_, side_;
    float gain_;
};

/// Engine that ignores its input.
class ConstantEngine final : public InferenceEngine {
public:
    explicit ConstantEngine(ModelOutput out) : out_(std::move(out)) {}
    ModelOutput forward_ablated(const Tensor&, const AblationRequest&) override { return out_; }
    EngineDescriptor descriptor() const override {
        return {out_.main.channels(), out_.activations.channels(), "constant"};
    }

private:
    ModelOutput out_;
};

/// Counts calls reaching the wrapped engine.
class CountingEngine final : public InferenceEngine {
public:
    explicit CountingEngine(std::shared_ptr<InferenceEngine> inner) : inner_(std::move(inner)) {}
    ModelOutput forward_ablated(const Tensor& image, const AblationRequest& a) override {
        ++calls;
        return inner_->forward_ablated(image, a);
    }
    EngineDescriptor descriptor() const override { return inner_->descriptor(); }
    int calls = 0;

private:
    std::shared_ptr<InferenceEngine> inner_;
};

/// Synthetic WSDE scene: n actuation centres, a predicted square of side
/// 2*pred_half+1 around each, and a CAM made of equal Gaussian bumps.
struct WsdeScene {
    Tensor cam;
    LabelMask pred;
    std::vector<PixelPoint> centres;
};

inline WsdeScene make_wsde_scene(std::mt19937_64& rng, int n, int class_id, Index size = 64, int pred_half = 4,
                                 double min_separation = 10.0) {
    const int margin = pred_half + 2;
    std::uniform_int_distribution<int> pos(margin, static_cast<int>(size) - 1 - margin);
    WsdeScene scene;
    while (static_cast<int>(scene.centres.size()) < n) {
        PixelPoint p{pos(rng), pos(rng)};
        bool ok = true;
        for (const auto& q : scene.centres) {
            const int cheb = std::max(std::abs(p.row - q.row), std::abs(p.col - q.col));
            const double d = std::sqrt(squared_distance(p, q));
            if (d <= min_separation || cheb < 2 * pred_half + 3) ok = false;
        }
        if (ok) scene.centres.push_back(p);
    }
    scene.pred = LabelMask(size, size);
    scene.cam = Tensor::plane(size, size);
    const double sigma2 = 2.5 * 2.5;
    for (Index y = 0; y < size; ++y)
        for (Index x = 0; x < size; ++x) {
            double v = 0.0;
            for (const auto& c : scene.centres) {
                const double d2 = (y - c.row) * (y - c.row) + (x - c.col) * (x - c.col);
                v = std::max(v, std::exp(-d2 / (2.0 * sigma2)));
                if (std::abs(y - c.row) <= pred_half && std::abs(x - c.col) <= pred_half) scene.pred.set(y, x, class_id);
            }
            scene.cam.at(y, x) = static_cast<float>(v);
        }
    return scene;
}

}  // namespace sprayeval::testing
