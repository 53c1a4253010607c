#include "sprayeval/engine.hpp"

#include <algorithm>
#include <bit>

namespace sprayeval {

AblationRequest::AblationRequest(std::vector<std::uint32_t> channel_ids) : ids_(std::move(channel_ids)) {
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
        throw ContractError("ablation request lists a channel twice");
    }
}

void AblationRequest::check_range(Index k) const {
    if (!ids_.empty() && static_cast<Index>(ids_.back()) >= k) {
        throw ContractError("ablation channel " + std::to_string(ids_.back()) + " outside [0, " + std::to_string(k) +
                            ")");
    }
}

ToyFcnWeights ToyFcnWeights::from_seed(std::uint64_t seed, Index num_classes, Index hidden, Index num_activations) {
    std::uint64_t state = seed;
    auto fill = [&state](Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(splitmix_unit(state) - 0.5);
        return m;
    };
    ToyFcnWeights w;
    w.conv1 = fill(hidden, 3 * 9);
    w.aux_head = fill(num_classes, hidden);
    w.conv2 = fill(num_activations, hidden * 9);
    w.main_head = fill(num_classes, num_activations);
    return w;
}

Tensor conv3x3_s2_relu(const Tensor& input, const ToyFcnWeights::Matrix& weights) {
    const Index in_c = input.channels(), h = input.height(), w = input.width();
    if (weights.cols() != in_c * 9) throw ContractError("conv3x3: weight columns do not match input channels");
    const Index oh = (h - 1) / 2 + 1, ow = (w - 1) / 2 + 1;

    Eigen::MatrixXf cols = Eigen::MatrixXf::Zero(in_c * 9, oh * ow);
    for (Index c = 0; c < in_c; ++c) {
        auto plane = input.channel(c);
        for (Index ky = 0; ky < 3; ++ky) {
            for (Index kx = 0; kx < 3; ++kx) {
                const Index row = (c * 3 + ky) * 3 + kx;
                for (Index oy = 0; oy < oh; ++oy) {
                    const Index y = 2 * oy + ky - 1;
                    if (y < 0 || y >= h) continue;
                    for (Index ox = 0; ox < ow; ++ox) {
                        const Index x = 2 * ox + kx - 1;
                        if (x < 0 || x >= w) continue;
                        cols(row, oy * ow + ox) = plane(y, x);
                    }
                }
            }
        }
    }
    Eigen::MatrixXf out = (weights * cols).cwiseMax(0.0f);

    Tensor result(weights.rows(), oh, ow);
    for (Index k = 0; k < weights.rows(); ++k) result.channel_flat(k) = out.row(k).transpose().array();
    return result;
}

Tensor conv1x1(const Tensor& input, const ToyFcnWeights::Matrix& weights) {
    if (weights.cols() != input.channels()) throw ContractError("conv1x1: weight columns do not match input channels");
    const Index n = input.plane_size();
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> in(input.data().data(),
                                                                                               input.channels(), n);
    Tensor result(weights.rows(), input.height(), input.width());
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> out(result.data().data(),
                                                                                          weights.rows(), n);
    out.noalias() = weights * in;
    return result;
}

ToyFcn::ToyFcn(ToyFcnWeights weights, std::string name) : weights_(std::move(weights)), name_(std::move(name)) {
    if (weights_.conv1.cols() != 27 || weights_.aux_head.cols() != weights_.hidden() ||
        weights_.conv2.cols() != weights_.hidden() * 9 || weights_.main_head.cols() != weights_.num_activations() ||
        weights_.aux_head.rows() != weights_.num_classes()) {
        throw ContractError("inconsistent toy model weight shapes");
    }
}

EngineDescriptor ToyFcn::descriptor() const { return {weights_.num_classes(), weights_.num_activations(), name_}; }

Tensor ToyFcn::main_head(const Tensor& activations, Index out_h, Index out_w) const {
    return bilinear_resize(conv1x1(activations, weights_.main_head), out_h, out_w);
}

ModelOutput ToyFcn::forward_ablated(const Tensor& image, const AblationRequest& ablation) {
    if (image.rank() != 3 || image.channels() != 3) throw ContractError("toy model expects a (3, H, W) image");
    if (image.height() < 8 || image.width() < 8) throw ContractError("toy model needs H, W >= 8");
    ablation.check_range(weights_.num_activations());

    ModelOutput out;
    const Tensor hidden = conv3x3_s2_relu(image, weights_.conv1);
    out.aux = conv1x1(hidden, weights_.aux_head);
    out.activations = conv3x3_s2_relu(hidden, weights_.conv2);
    for (std::uint32_t k : ablation.channels()) out.activations.channel_flat(k).setZero();
    out.main = main_head(out.activations, image.height(), image.width());
    return out;
}

ModelOutput toy_fcn_forward(const Tensor& image, std::uint64_t seed) { return ToyFcn(seed).forward(image); }

// ---------------------------------------------------------------------------

CachedEngine::CachedEngine(std::shared_ptr<InferenceEngine> inner, std::size_t capacity)
    : inner_(std::move(inner)), capacity_(capacity) {
    if (!inner_) throw ArgumentError("cached engine needs an inner engine");
}

std::uint64_t CachedEngine::content_hash(const Tensor& image, const AblationRequest& ablation) {
    // FNV-1a over shape, payload bits and ablation ids.
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    for (Index e : image.shape()) mix(static_cast<std::uint64_t>(e));
    for (Index i = 0; i < image.size(); ++i) mix(std::bit_cast<std::uint32_t>(image.data()[i]));
    mix(0xffffffffffffffffull);
    for (std::uint32_t id : ablation.channels()) mix(id);
    return h;
}

ModelOutput CachedEngine::forward_ablated(const Tensor& image, const AblationRequest& ablation) {
    std::lock_guard lock(mutex_);
    if (capacity_ == 0) {
        ++misses_;
        return inner_->forward_ablated(image, ablation);
    }
    const std::uint64_t key = content_hash(image, ablation);
    auto [first, last] = index_.equal_range(key);
    for (auto it = first; it != last; ++it) {
        auto entry = it->second;
        if (entry->ablation == ablation && entry->image == image) {
            lru_.splice(lru_.begin(), lru_, entry);
            ++hits_;
            return entry->output;
        }
    }
    ++misses_;
    ModelOutput out = inner_->forward_ablated(image, ablation);
    lru_.push_front(Entry{key, image, ablation, out});
    index_.emplace(key, lru_.begin());
    while (lru_.size() > capacity_) {
        auto victim = std::prev(lru_.end());
        auto [vf, vl] = index_.equal_range(victim->key);
        for (auto it = vf; it != vl; ++it) {
            if (it->second == victim) {
                index_.erase(it);
                break;
            }
        }
        lru_.pop_back();
    }
    return out;
}

std::size_t CachedEngine::size() const {
    std::lock_guard lock(mutex_);
    return lru_.size();
}

std::size_t CachedEngine::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t CachedEngine::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

std::shared_ptr<InferenceEngine> cached_engine(std::shared_ptr<InferenceEngine> inner, std::size_t capacity) {
    return std::make_shared<CachedEngine>(std::move(inner), capacity);
}

}  // namespace sprayeval
