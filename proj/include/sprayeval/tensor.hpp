#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sprayeval/errors.hpp"

namespace sprayeval {

using Index = Eigen::Index;

/// Dense channel-major, row-major array of rank 2 (H, W) or rank 3 (C, H, W).
///
/// A rank-2 tensor behaves as a single-channel tensor for the kernels below,
/// so CAM maps and logits go through the same code paths.
template <typename Scalar>
class BasicTensor {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using PlaneMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Plane = Eigen::Map<PlaneMatrix>;
    using ConstPlane = Eigen::Map<const PlaneMatrix>;

    BasicTensor() = default;

    BasicTensor(Index channels, Index height, Index width)
        : shape_{channels, height, width}, data_(Array::Zero(channels * height * width)) {
        check_shape();
    }

    BasicTensor(std::vector<Index> shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape();
        if (data_.size() != element_count(shape_)) {
            throw CorruptionError("tensor payload has " + std::to_string(data_.size()) +
                                  " values, shape needs " + std::to_string(element_count(shape_)));
        }
    }

    static BasicTensor plane(Index height, Index width) {
        return BasicTensor({height, width}, Array::Zero(height * width));
    }

    static BasicTensor constant(std::vector<Index> shape, Scalar value) {
        const Index n = element_count(shape);
        return BasicTensor(std::move(shape), Array::Constant(n, value));
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<Index>& shape() const { return shape_; }
    Index channels() const { return rank() == 3 ? shape_[0] : 1; }
    Index height() const { return shape_[rank() - 2]; }
    Index width() const { return shape_[rank() - 1]; }
    Index plane_size() const { return height() * width(); }
    Index size() const { return data_.size(); }
    bool empty() const { return shape_.empty(); }

    Array& data() { return data_; }
    const Array& data() const { return data_; }

    Scalar& operator()(Index c, Index y, Index x) { return data_[(c * height() + y) * width() + x]; }
    Scalar operator()(Index c, Index y, Index x) const { return data_[(c * height() + y) * width() + x]; }
    Scalar& at(Index y, Index x) { return data_[y * width() + x]; }
    Scalar at(Index y, Index x) const { return data_[y * width() + x]; }

    Plane channel(Index c) { return Plane(data_.data() + c * plane_size(), height(), width()); }
    ConstPlane channel(Index c) const { return ConstPlane(data_.data() + c * plane_size(), height(), width()); }

    /// Flat view of one channel, length H*W.
    Eigen::Map<Array> channel_flat(Index c) { return Eigen::Map<Array>(data_.data() + c * plane_size(), plane_size()); }
    Eigen::Map<const Array> channel_flat(Index c) const {
        return Eigen::Map<const Array>(data_.data() + c * plane_size(), plane_size());
    }

    template <typename Other>
    BasicTensor<Other> cast() const {
        return BasicTensor<Other>(shape_, data_.template cast<Other>());
    }

    bool all_finite() const { return data_.allFinite(); }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
    }

private:
    static Index element_count(const std::vector<Index>& shape) {
        Index n = 1;
        for (Index e : shape) n *= e;
        return n;
    }

    void check_shape() const {
        if (shape_.size() != 2 && shape_.size() != 3) {
            throw ArgumentError("tensor rank must be 2 or 3, got " + std::to_string(shape_.size()));
        }
        for (Index e : shape_) {
            if (e <= 0) throw ArgumentError("tensor extents must be positive");
        }
    }

    std::vector<Index> shape_;
    Array data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

inline constexpr int kDatasetClassCount = 7;

/// Height x width grid of class ids in [0, num_classes).
class LabelMask {
public:
    using Matrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    LabelMask() = default;
    LabelMask(Index height, Index width, int num_classes = kDatasetClassCount);
    /// Throws DataError if any label is outside [0, num_classes).
    LabelMask(Matrix labels, int num_classes = kDatasetClassCount);

    Index height() const { return labels_.rows(); }
    Index width() const { return labels_.cols(); }
    Index size() const { return labels_.size(); }
    int num_classes() const { return num_classes_; }

    int operator()(Index y, Index x) const { return labels_(y, x); }
    int flat(Index i) const { return labels_.data()[i]; }
    void set(Index y, Index x, int label);

    const Matrix& labels() const { return labels_; }
    Index count(int class_id) const { return (labels_.array() == static_cast<std::uint8_t>(class_id)).count(); }

    friend bool operator==(const LabelMask& a, const LabelMask& b) {
        return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_;
    }

private:
    Matrix labels_;
    int num_classes_ = kDatasetClassCount;
};

/// Class id <-> name table plus the sprayed -> base class pairing.
class ClassTable {
public:
    ClassTable(std::vector<std::string> names, std::map<int, int> sprayed_pair);

    /// background, lettuce, chickweed, meadowgrass and their sprayed variants.
    static const ClassTable& dataset();

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int id) const;
    int id(const std::string& name) const;
    bool is_sprayed(int id) const { return sprayed_pair_.count(id) != 0; }
    int base_of(int sprayed_id) const;
    std::vector<int> sprayed_classes() const;
    const std::map<int, int>& sprayed_pair() const { return sprayed_pair_; }

private:
    std::vector<std::string> names_;
    std::map<int, int> sprayed_pair_;
};

// ---------------------------------------------------------------------------
// Kernels

/// Bilinear resize with the align_corners=false convention: output pixel i maps
/// to source coordinate (i + 0.5) * in / out - 0.5, clamped at the low edge.
template <typename Scalar>
BasicTensor<Scalar> bilinear_resize(const BasicTensor<Scalar>& t, Index out_h, Index out_w) {
    if (out_h < 1 || out_w < 1) throw ArgumentError("bilinear_resize: target extents must be >= 1");
    const Index in_h = t.height(), in_w = t.width();
    std::vector<Index> shape = t.rank() == 3 ? std::vector<Index>{t.channels(), out_h, out_w}
                                             : std::vector<Index>{out_h, out_w};
    using Array = typename BasicTensor<Scalar>::Array;
    BasicTensor<Scalar> out(shape, Array::Zero(t.channels() * out_h * out_w));
    if (in_h == out_h && in_w == out_w) {
        out.data() = t.data();
        return out;
    }

    struct Tap {
        Index lo, hi;
        Scalar frac;
    };
    auto taps = [](Index in, Index outn) {
        std::vector<Tap> v(static_cast<std::size_t>(outn));
        const double scale = static_cast<double>(in) / static_cast<double>(outn);
        for (Index i = 0; i < outn; ++i) {
            double src = std::max((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0);
            Index lo = std::min(static_cast<Index>(src), in - 1);
            Index hi = lo + (lo < in - 1 ? 1 : 0);
            v[static_cast<std::size_t>(i)] = {lo, hi, static_cast<Scalar>(src - static_cast<double>(lo))};
        }
        return v;
    };
    const auto ty = taps(in_h, out_h);
    const auto tx = taps(in_w, out_w);

    for (Index c = 0; c < t.channels(); ++c) {
        auto src = t.channel(c);
        auto dst = out.channel(c);
        for (Index y = 0; y < out_h; ++y) {
            const Tap& a = ty[static_cast<std::size_t>(y)];
            for (Index x = 0; x < out_w; ++x) {
                const Tap& b = tx[static_cast<std::size_t>(x)];
                const Scalar top = src(a.lo, b.lo) + b.frac * (src(a.lo, b.hi) - src(a.lo, b.lo));
                const Scalar bot = src(a.hi, b.lo) + b.frac * (src(a.hi, b.hi) - src(a.hi, b.lo));
                dst(y, x) = top + a.frac * (bot - top);
            }
        }
    }
    return out;
}

/// Per-pixel softmax across channels, max-subtracted, accumulated in double.
template <typename Scalar>
BasicTensor<Scalar> softmax_channels(const BasicTensor<Scalar>& t) {
    BasicTensor<Scalar> out = t;
    const Index n = t.plane_size(), channels = t.channels();
    std::vector<double> e(static_cast<std::size_t>(channels));
    for (Index p = 0; p < n; ++p) {
        double m = t.data()[p];
        for (Index c = 1; c < channels; ++c) m = std::max(m, static_cast<double>(t.data()[c * n + p]));
        double sum = 0.0;
        for (Index c = 0; c < channels; ++c) {
            e[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(t.data()[c * n + p]) - m);
            sum += e[static_cast<std::size_t>(c)];
        }
        for (Index c = 0; c < channels; ++c) out.data()[c * n + p] = static_cast<Scalar>(e[static_cast<std::size_t>(c)] / sum);
    }
    return out;
}

/// Per-pixel index of the largest channel; ties go to the lowest class id.
template <typename Scalar>
LabelMask argmax_mask(const BasicTensor<Scalar>& t) {
    if (t.channels() > 256) throw ArgumentError("argmax_mask: at most 256 classes");
    LabelMask::Matrix labels(t.height(), t.width());
    const Index n = t.plane_size();
    for (Index p = 0; p < n; ++p) {
        Index best = 0;
        Scalar best_v = t.data()[p];
        for (Index c = 1; c < t.channels(); ++c) {
            const Scalar v = t.data()[c * n + p];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        labels.data()[p] = static_cast<std::uint8_t>(best);
    }
    return LabelMask(std::move(labels), static_cast<int>(t.channels()));
}

/// Linear-interpolation percentile: rank r = p/100 * (n - 1) over the sorted values.
template <typename Scalar>
double percentile(std::span<const Scalar> values, double p) {
    if (values.empty()) throw ArgumentError("percentile of an empty sequence");
    if (!(p >= 0.0 && p <= 100.0)) throw ArgumentError("percentile must be within [0, 100]");
    std::vector<Scalar> v(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
    return a + (rank - static_cast<double>(lo)) * (b - a);
}

/// (t - min) / (max - min) over the whole tensor; a constant tensor maps to zeros.
template <typename Scalar>
BasicTensor<Scalar> minmax_normalize(const BasicTensor<Scalar>& t) {
    BasicTensor<Scalar> out = t;
    const Scalar lo = t.data().minCoeff();
    const Scalar hi = t.data().maxCoeff();
    if (!(hi > lo)) {
        out.data().setZero();
        return out;
    }
    out.data() = ((t.data() - lo) / (hi - lo)).min(Scalar(1)).max(Scalar(0));
    return out;
}

}  // namespace sprayeval
