#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sprayeval/cam.hpp"
#include "support.hpp"

namespace sprayeval {
namespace {

using testing::random_tensor;

const FusionConfig kOut{};

Tensor random_image(std::mt19937_64& rng, Index h = 16, Index w = 16) { return random_tensor(rng, {3, h, w}, 0, 1); }

/// Most frequent non-background class in the fused prediction, or -1.
int dominant_class(InferenceEngine& engine, const Tensor& image, const FusionConfig& cfg = kOut) {
    const LabelMask pred = argmax_mask(fused_logits(engine.forward(image), cfg));
    int best = -1;
    Index best_n = 0;
    for (int c = 1; c < pred.num_classes(); ++c)
        if (pred.count(c) > best_n) best = c, best_n = pred.count(c);
    return best;
}

void expect_valid_cam(const Cam& cam, Index h, Index w) {
    ASSERT_EQ(cam.map.rank(), 2);
    EXPECT_EQ(cam.map.height(), h);
    EXPECT_EQ(cam.map.width(), w);
    EXPECT_TRUE(cam.map.all_finite());
    EXPECT_GE(cam.map.data().minCoeff(), 0.0f);
    EXPECT_LE(cam.map.data().maxCoeff(), 1.0f);
    const float top = cam.map.data().maxCoeff();
    EXPECT_TRUE(top == 1.0f || top == 0.0f);
}

// ---------------------------------------------------------------------------
// target score

TEST(TargetScore, LargeGapApproachesOne) {
    Tensor logits(7, 3, 3);
    logits.channel_flat(4).setConstant(20.0f);
    const TargetRegion r = TargetRegion::from_logits(logits, 4);
    EXPECT_EQ(r.pixels.size(), 9u);
    EXPECT_GE(target_score(logits, r), 0.999);
}

TEST(TargetScore, EmptyRegionScoresZero) {
    TargetRegion r;
    r.class_id = 2;
    EXPECT_EQ(target_score(Tensor(7, 4, 4), r), 0.0);
    EXPECT_TRUE(TargetRegion::from_logits(Tensor(7, 4, 4), 2).empty());
}

TEST(TargetScore, MatchesPerPixelSoftmaxMean) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor logits = random_tensor(rng, {7, 5, 5}, -6, 6);
        TargetRegion r;
        r.class_id = trial % 7;
        std::vector<Index> all(25);
        std::iota(all.begin(), all.end(), Index{0});
        std::shuffle(all.begin(), all.end(), rng);
        r.pixels.assign(all.begin(), all.begin() + 10);
        double expect = 0.0;
        for (Index p : r.pixels) {
            double z = 0.0;
            for (Index c = 0; c < 7; ++c) z += std::exp(static_cast<double>(logits.data()[c * 25 + p]));
            expect += std::exp(static_cast<double>(logits.data()[r.class_id * 25 + p])) / z;
        }
        EXPECT_NEAR(target_score(logits, r), expect / 10.0, 1e-12);
    }
}

TEST(TargetScore, InvalidClassIsArgumentError) {
    TargetRegion r;
    r.class_id = 7;
    EXPECT_THROW(target_score(Tensor(7, 2, 2), r), ArgumentError);
}

// ---------------------------------------------------------------------------
// AblationCAM

/// Toy weights whose main head only connects `class_id` to channel `channel`.
struct SingleChannelModel {
    ToyFcnWeights weights;
    Tensor image;
};

SingleChannelModel single_channel_model(int class_id, Index channel, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        SingleChannelModel m{ToyFcnWeights::from_seed(seed * 131 + static_cast<std::uint64_t>(attempt)),
                             random_image(rng)};
        m.weights.main_head.setZero();
        m.weights.main_head(class_id, channel) = 2.0f;
        const Tensor act = ToyFcn(m.weights).forward(m.image).activations;
        const auto a = act.channel_flat(channel);
        if (a.maxCoeff() > 0.05f && a.minCoeff() < a.maxCoeff()) return m;
    }
    ADD_FAILURE() << "no seed produced a non-degenerate channel";
    return {};
}

TEST(AblationCam, SingleDrivingChannelGivesItsNormalizedActivation) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const int c = 4;
        const SingleChannelModel m = single_channel_model(c, 3, seed);
        ToyFcn toy(m.weights);
        const Cam cam = ablation_cam(toy, m.image, c, kOut);

        const ModelOutput base = toy.forward(m.image);
        const Tensor fused = fused_logits(base, kOut);
        const double s = target_score(fused, TargetRegion::from_logits(fused, c));
        // ablating the driving channel zeroes every logit, leaving 1/C
        const double w3 = (s - 1.0 / 7.0) / s;
        ASSERT_EQ(cam.channel_weights.size(), 8u);
        for (std::size_t k = 0; k < 8; ++k) {
            if (k == 3)
                EXPECT_NEAR(cam.channel_weights[k], w3, 1e-6);
            else
                EXPECT_EQ(cam.channel_weights[k], 0.0) << k;
        }
        const Tensor up = bilinear_resize(base.activations, 16, 16);
        const Tensor expect = minmax_normalize(Tensor({16, 16}, up.channel_flat(3)));
        EXPECT_LT((cam.map.data() - expect.data()).abs().maxCoeff(), 1e-5f) << seed;
        expect_valid_cam(cam, 16, 16);
    }
}

TEST(AblationCam, AbsentClassThrows) {
    ToyFcnWeights w = ToyFcnWeights::from_seed(3);
    w.main_head.row(5).setConstant(-10.0f);
    ToyFcn toy(w);
    std::mt19937_64 rng(2);
    const Tensor img = random_image(rng);
    ASSERT_TRUE(TargetRegion::from_logits(toy.forward(img).main, 5).empty());
    EXPECT_THROW(ablation_cam(toy, img, 5, kOut), ClassAbsentError);
    EXPECT_THROW(score_cam(toy, img, 5, kOut), ClassAbsentError);
}

ToyFcnWeights permuted(const ToyFcnWeights& w, const std::vector<Index>& perm) {
    ToyFcnWeights p = w;
    for (Index j = 0; j < w.num_activations(); ++j) {
        p.conv2.row(j) = w.conv2.row(perm[static_cast<std::size_t>(j)]);
        p.main_head.col(j) = w.main_head.col(perm[static_cast<std::size_t>(j)]);
    }
    return p;
}

TEST(AblationCam, ChannelPermutationLeavesMapUnchanged) {
    std::mt19937_64 rng(3);
    std::vector<Index> perm(8);
    std::iota(perm.begin(), perm.end(), Index{0});
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const ToyFcnWeights w = ToyFcnWeights::from_seed(seed);
        ToyFcn a(w);
        const Tensor img = random_image(rng);
        const int c = dominant_class(a, img);
        if (c < 0) continue;
        std::shuffle(perm.begin(), perm.end(), rng);
        ToyFcn b(permuted(w, perm));
        for (CamMethod method : {CamMethod::ablation, CamMethod::score}) {
            const Cam ca = compute_cam(method, a, img, c, kOut);
            const Cam cb = compute_cam(method, b, img, c, kOut);
            EXPECT_LT((ca.map.data() - cb.map.data()).abs().maxCoeff(), 1e-5f);
            if (method == CamMethod::ablation)
                for (std::size_t j = 0; j < 8; ++j)
                    EXPECT_NEAR(cb.channel_weights[j], ca.channel_weights[static_cast<std::size_t>(perm[j])], 1e-6);
        }
        ++checked;
    }
    EXPECT_GE(checked, 6);
}

TEST(Cams, InvariantToActivationRescaling) {
    std::mt19937_64 rng(4);
    int checked = 0;
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        const ToyFcnWeights w = ToyFcnWeights::from_seed(seed);
        ToyFcn a(w);
        const Tensor img = random_image(rng);
        const int c = dominant_class(a, img);
        if (c < 0) continue;
        for (float s : {4.0f, 3.0f}) {
            ToyFcnWeights ws = w;
            ws.conv2 *= s;
            ws.main_head /= s;
            ToyFcn b(ws);
            ASSERT_EQ(argmax_mask(b.forward(img).main), argmax_mask(a.forward(img).main));
            for (CamMethod method : {CamMethod::ablation, CamMethod::score}) {
                const Cam ca = compute_cam(method, a, img, c, kOut);
                const Cam cb = compute_cam(method, b, img, c, kOut);
                for (std::size_t k = 0; k < ca.channel_weights.size(); ++k)
                    EXPECT_NEAR(ca.channel_weights[k], cb.channel_weights[k], 1e-5);
                EXPECT_LT((ca.map.data() - cb.map.data()).abs().maxCoeff(), 1e-4f);
            }
        }
        ++checked;
    }
    EXPECT_GE(checked, 5);
}

TEST(Cams, RangeInvariantOnRandomToys) {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 40; seed < 52; ++seed) {
        ToyFcn toy(seed);
        const Tensor img = random_image(rng, 20, 12);
        const int c = dominant_class(toy, img, {FusionMode::add, FusionSpace::logit});
        if (c < 0) continue;
        for (CamMethod method : {CamMethod::ablation, CamMethod::score}) {
            const Cam cam = compute_cam(method, toy, img, c, {FusionMode::add, FusionSpace::logit});
            EXPECT_EQ(cam.class_id, c);
            EXPECT_EQ(cam.method, method);
            expect_valid_cam(cam, 20, 12);
        }
    }
}

// ---------------------------------------------------------------------------
// ScoreCAM

TEST(ScoreCam, IdenticalChannelsGiveUniformWeights) {
    std::mt19937_64 rng(6);
    int checked = 0;
    for (std::uint64_t seed = 60; seed < 70; ++seed) {
        ToyFcnWeights w = ToyFcnWeights::from_seed(seed);
        for (Index k = 1; k < 8; ++k) w.conv2.row(k) = w.conv2.row(0);
        ToyFcn toy(w);
        const Tensor img = random_image(rng);
        const int c = dominant_class(toy, img);
        if (c < 0) continue;
        const Cam cam = score_cam(toy, img, c, kOut);
        for (double a : cam.channel_weights) EXPECT_NEAR(a, 1.0 / 8.0, 1e-12);
        const Tensor up = bilinear_resize(toy.forward(img).activations, 16, 16);
        const Tensor expect = minmax_normalize(Tensor({16, 16}, up.channel_flat(0)));
        EXPECT_LT((cam.map.data() - expect.data()).abs().maxCoeff(), 1e-5f);
        ++checked;
    }
    EXPECT_GE(checked, 3);
}

TEST(ScoreCam, ConstantChannelStillContributes) {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (std::uint64_t seed = 70; seed < 80; ++seed) {
        ToyFcnWeights w = ToyFcnWeights::from_seed(seed);
        w.conv2.row(2).setZero();
        ToyFcn toy(w);
        const Tensor img = random_image(rng);
        const int c = dominant_class(toy, img);
        if (c < 0) continue;
        const Cam cam = score_cam(toy, img, c, kOut);
        expect_valid_cam(cam, 16, 16);
        EXPECT_GT(cam.channel_weights[2], 0.0);
        EXPECT_NEAR(std::accumulate(cam.channel_weights.begin(), cam.channel_weights.end(), 0.0), 1.0, 1e-12);
        ++checked;
    }
    EXPECT_GE(checked, 3);
}

TEST(ScoreCam, SingleChannelReturnsNormalizedActivation) {
    std::mt19937_64 rng(8);
    int checked = 0;
    for (std::uint64_t seed = 80; seed < 100; ++seed) {
        ToyFcn toy(ToyFcnWeights::from_seed(seed, 7, 8, 1));
        const Tensor img = random_image(rng);
        const int c = dominant_class(toy, img);
        if (c < 0) continue;
        const Cam cam = score_cam(toy, img, c, kOut);
        ASSERT_EQ(cam.channel_weights.size(), 1u);
        EXPECT_EQ(cam.channel_weights[0], 1.0);
        const Tensor up = bilinear_resize(toy.forward(img).activations, 16, 16);
        const Tensor expect = minmax_normalize(Tensor({16, 16}, up.channel_flat(0)));
        EXPECT_LT((cam.map.data() - expect.data()).abs().maxCoeff(), 1e-6f);
        ++checked;
    }
    EXPECT_GE(checked, 5);
}

/// ScoreCAM composed step by step in double precision.
TensorD score_cam_reference(InferenceEngine& engine, const Tensor& image, int c) {
    const Index h = image.height(), w = image.width();
    const ModelOutput base = engine.forward(image);
    const TargetRegion region = TargetRegion::from_logits(base.main, c);
    const TensorD up = bilinear_resize(base.activations.cast<double>(), h, w);
    const Index k_count = up.channels();
    std::vector<double> scores;
    for (Index k = 0; k < k_count; ++k) {
        const TensorD mask = minmax_normalize(TensorD({h, w}, up.channel_flat(k)));
        Tensor masked = image;
        for (Index ch = 0; ch < 3; ++ch)
            for (Index p = 0; p < h * w; ++p)
                masked.data()[ch * h * w + p] = static_cast<float>(image.data()[ch * h * w + p] * mask.data()[p]);
        const TensorD prob = softmax_channels(engine.forward(masked).main.cast<double>());
        double s = 0.0;
        for (Index p : region.pixels) s += prob.data()[c * h * w + p];
        scores.push_back(s / static_cast<double>(region.pixels.size()));
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - top);
    TensorD raw = TensorD::plane(h, w);
    for (Index k = 0; k < k_count; ++k)
        raw.data() += std::exp(scores[static_cast<std::size_t>(k)] - top) / z * up.channel_flat(k);
    raw.data() = raw.data().max(0.0);
    return minmax_normalize(raw);
}

TEST(ScoreCam, MatchesDoublePrecisionReference) {
    std::mt19937_64 rng(9);
    int checked = 0;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        ToyFcn toy(seed);
        const Tensor img = random_image(rng);
        const int c = dominant_class(toy, img);
        if (c < 0) continue;
        const Cam cam = score_cam(toy, img, c, kOut);
        const TensorD ref = score_cam_reference(toy, img, c);
        EXPECT_LT((cam.map.data().cast<double>() - ref.data()).abs().maxCoeff(), 1e-5);
        ++checked;
    }
    EXPECT_GE(checked, 5);
}

TEST(CamParse, Names) {
    EXPECT_EQ(parse_cam_method("ablation"), CamMethod::ablation);
    EXPECT_EQ(parse_cam_method(to_string(CamMethod::score)), CamMethod::score);
    EXPECT_THROW(parse_cam_method("grad"), ConfigError);
}

}  // namespace
}  // namespace sprayeval
