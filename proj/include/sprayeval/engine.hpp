#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

/// One forward pass: main logits at input resolution, auxiliary logits at any
/// resolution, and the final backbone activations the CAMs are built from.
struct ModelOutput {
    Tensor main;
    Tensor aux;
    Tensor activations;
};

/// Sorted, duplicate-free set of activation channels to zero.
class AblationRequest {
public:
    AblationRequest() = default;
    explicit AblationRequest(std::vector<std::uint32_t> channel_ids);

    const std::vector<std::uint32_t>& channels() const { return ids_; }
    bool empty() const { return ids_.empty(); }
    /// Throws ContractError unless every id is < k.
    void check_range(Index k) const;

    friend bool operator==(const AblationRequest&, const AblationRequest&) = default;

private:
    std::vector<std::uint32_t> ids_;
};

struct EngineDescriptor {
    Index num_classes = 0;
    Index num_activations = 0;
    std::string name;
};

/// Inference contract the pipeline is written against. Implementations are
/// deterministic and need only support serialized access.
class InferenceEngine {
public:
    virtual ~InferenceEngine() = default;

    virtual ModelOutput forward(const Tensor& image) { return forward_ablated(image, AblationRequest{}); }
    /// Same pass as forward() with the listed activation channels zeroed before
    /// the classification head.
    virtual ModelOutput forward_ablated(const Tensor& image, const AblationRequest& ablation) = 0;
    virtual EngineDescriptor descriptor() const = 0;
};

/// splitmix64 step; also the weight source of the toy model.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of a splitmix64 draw.
inline double splitmix_unit(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

/// Weights of the built-in fully convolutional toy model. Convolutions are
/// bias-free 3x3, stride 2, zero padding 1; heads are 1x1.
struct ToyFcnWeights {
    using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Matrix conv1;      // hidden x (3*3*3), column index (in_channel*3 + ky)*3 + kx
    Matrix aux_head;   // classes x hidden
    Matrix conv2;      // K x (hidden*3*3)
    Matrix main_head;  // classes x K

    Index num_classes() const { return main_head.rows(); }
    Index hidden() const { return conv1.rows(); }
    Index num_activations() const { return conv2.rows(); }

    /// Draws every weight from splitmix64(seed) mapped to [-0.5, 0.5), in the
    /// order conv1, aux_head, conv2, main_head, each row-major.
    static ToyFcnWeights from_seed(std::uint64_t seed, Index num_classes = kDatasetClassCount, Index hidden = 8,
                                   Index num_activations = 8);
};

class ToyFcn final : public InferenceEngine {
public:
    explicit ToyFcn(ToyFcnWeights weights, std::string name = "toy");
    explicit ToyFcn(std::uint64_t seed) : ToyFcn(ToyFcnWeights::from_seed(seed), "toy:" + std::to_string(seed)) {}

    ModelOutput forward_ablated(const Tensor& image, const AblationRequest& ablation) override;
    EngineDescriptor descriptor() const override;

    const ToyFcnWeights& weights() const { return weights_; }

    /// Applies the main head to (possibly edited) activations and resizes the
    /// result to out_h x out_w.
    Tensor main_head(const Tensor& activations, Index out_h, Index out_w) const;

private:
    ToyFcnWeights weights_;
    std::string name_;
};

ModelOutput toy_fcn_forward(const Tensor& image, std::uint64_t seed);

/// 3x3 stride-2 zero-padded convolution followed by ReLU; weights laid out as
/// in ToyFcnWeights.
Tensor conv3x3_s2_relu(const Tensor& input, const ToyFcnWeights::Matrix& weights);
/// Per-pixel linear map across channels.
Tensor conv1x1(const Tensor& input, const ToyFcnWeights::Matrix& weights);

/// Memoizing wrapper keyed by a 64-bit content hash of (image, ablation set)
/// with LRU eviction. Safe to share between threads.
class CachedEngine final : public InferenceEngine {
public:
    CachedEngine(std::shared_ptr<InferenceEngine> inner, std::size_t capacity);

    ModelOutput forward_ablated(const Tensor& image, const AblationRequest& ablation) override;
    EngineDescriptor descriptor() const override { return inner_->descriptor(); }

    std::size_t size() const;
    std::size_t hits() const;
    std::size_t misses() const;

    static std::uint64_t content_hash(const Tensor& image, const AblationRequest& ablation);

private:
    struct Entry {
        std::uint64_t key;
        Tensor image;
        AblationRequest ablation;
        ModelOutput output;
    };

    std::shared_ptr<InferenceEngine> inner_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<Entry> lru_;
    std::unordered_multimap<std::uint64_t, std::list<Entry>::iterator> index_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

std::shared_ptr<InferenceEngine> cached_engine(std::shared_ptr<InferenceEngine> inner, std::size_t capacity);

}  // namespace sprayeval
