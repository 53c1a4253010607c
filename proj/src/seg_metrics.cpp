#include "sprayeval/seg_metrics.hpp"

namespace sprayeval {

ConfusionTally& ConfusionTally::operator+=(const ConfusionTally& o) {
    if (o.num_classes() != num_classes()) throw ContractError("cannot add tallies with different class counts");
    for (std::size_t c = 0; c < tp.size(); ++c) {
        tp[c] += o.tp[c];
        fp[c] += o.fp[c];
        fn[c] += o.fn[c];
    }
    pixels += o.pixels;
    return *this;
}

ConfusionTally tally(const LabelMask& pred, const LabelMask& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw ContractError("prediction and ground truth masks differ in size");
    }
    ConfusionTally t(std::max(pred.num_classes(), gt.num_classes()));
    for (Index i = 0; i < pred.size(); ++i) {
        const auto p = static_cast<std::size_t>(pred.flat(i));
        const auto g = static_cast<std::size_t>(gt.flat(i));
        if (p == g) {
            ++t.tp[p];
        } else {
            ++t.fp[p];
            ++t.fn[g];
        }
    }
    t.pixels = pred.size();
    return t;
}

PerClass dice_per_class(const ConfusionTally& t) {
    PerClass out(static_cast<std::size_t>(t.num_classes()));
    for (int c = 0; c < t.num_classes(); ++c) {
        if (!t.present(c)) continue;
        const auto i = static_cast<std::size_t>(c);
        out[i] = 2.0 * static_cast<double>(t.tp[i]) / static_cast<double>(2 * t.tp[i] + t.fp[i] + t.fn[i]);
    }
    return out;
}

PerClass iou_per_class(const ConfusionTally& t) {
    PerClass out(static_cast<std::size_t>(t.num_classes()));
    for (int c = 0; c < t.num_classes(); ++c) {
        if (!t.present(c)) continue;
        const auto i = static_cast<std::size_t>(c);
        out[i] = static_cast<double>(t.tp[i]) / static_cast<double>(t.tp[i] + t.fp[i] + t.fn[i]);
    }
    return out;
}

PerClass pixel_accuracy_per_class(const ConfusionTally& t) {
    PerClass out(static_cast<std::size_t>(t.num_classes()));
    for (int c = 0; c < t.num_classes(); ++c) {
        if (t.total_gt(c) == 0) continue;
        out[static_cast<std::size_t>(c)] =
            static_cast<double>(t.correct(c)) / static_cast<double>(t.total_gt(c));
    }
    return out;
}

std::optional<double> miou(const ConfusionTally& t, bool include_background) {
    const PerClass iou = iou_per_class(t);
    double sum = 0.0;
    int n = 0;
    for (int c = include_background ? 0 : 1; c < t.num_classes(); ++c) {
        if (const auto& v = iou[static_cast<std::size_t>(c)]) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

double micro_f1(const ConfusionTally& t, bool include_background) {
    long long tp = 0, fp = 0, fn = 0;
    for (int c = include_background ? 0 : 1; c < t.num_classes(); ++c) {
        const auto i = static_cast<std::size_t>(c);
        tp += t.tp[i];
        fp += t.fp[i];
        fn += t.fn[i];
    }
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

int not_applicable_count(const PerClass& values, bool include_background) {
    int n = 0;
    for (std::size_t c = include_background ? 0 : 1; c < values.size(); ++c) n += values[c] ? 0 : 1;
    return n;
}

}  // namespace sprayeval
