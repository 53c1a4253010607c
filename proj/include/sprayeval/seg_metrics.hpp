#pragma once

#include <optional>
#include <vector>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

/// Per-class pixel counts between a predicted and a ground-truth mask.
/// Value type; tallies over a dataset are sums of per-image tallies.
struct ConfusionTally {
    explicit ConfusionTally(int num_classes = kDatasetClassCount)
        : tp(static_cast<std::size_t>(num_classes)),
          fp(static_cast<std::size_t>(num_classes)),
          fn(static_cast<std::size_t>(num_classes)) {}

    std::vector<long long> tp, fp, fn;
    long long pixels = 0;

    int num_classes() const { return static_cast<int>(tp.size()); }
    long long correct(int c) const { return tp[static_cast<std::size_t>(c)]; }
    long long total_gt(int c) const { return tp[static_cast<std::size_t>(c)] + fn[static_cast<std::size_t>(c)]; }
    /// Class appears in the ground truth or in the prediction.
    bool present(int c) const {
        const auto i = static_cast<std::size_t>(c);
        return tp[i] + fp[i] + fn[i] > 0;
    }

    ConfusionTally& operator+=(const ConfusionTally& o);
    friend ConfusionTally operator+(ConfusionTally a, const ConfusionTally& b) { return a += b; }
    friend bool operator==(const ConfusionTally&, const ConfusionTally&) = default;
};

/// Throws ContractError when the masks differ in size.
ConfusionTally tally(const LabelMask& pred, const LabelMask& gt);

using PerClass = std::vector<std::optional<double>>;

/// 2TP / (2TP + FP + FN); nullopt for a class absent from both masks.
PerClass dice_per_class(const ConfusionTally& t);
/// TP / (TP + FP + FN); nullopt for a class absent from both masks.
PerClass iou_per_class(const ConfusionTally& t);
/// TP / GT pixel count (recall form); nullopt when the class has no GT pixels.
PerClass pixel_accuracy_per_class(const ConfusionTally& t);

/// Mean IoU over present classes; background (class 0) only when asked for.
/// nullopt when no class qualifies.
std::optional<double> miou(const ConfusionTally& t, bool include_background = false);

/// F1 from TP/FP/FN summed over the foreground classes (plus background when
/// asked for); 0 when every sum is 0.
double micro_f1(const ConfusionTally& t, bool include_background = false);

/// Number of foreground classes with a nullopt entry.
int not_applicable_count(const PerClass& values, bool include_background = false);

}  // namespace sprayeval
