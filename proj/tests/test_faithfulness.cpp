#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "sprayeval/faithfulness.hpp"
#include "support.hpp"

namespace sprayeval {
namespace {

using testing::random_tensor;

const FusionConfig kOut{};

// ---------------------------------------------------------------------------
// MoRF order

TEST(Morf, UniqueValuesSortDescending) {
    const Tensor cam({2, 3}, (Tensor::Array(6) << 0.1f, 0.9f, 0.5f, 0.3f, 0.7f, 0.0f).finished());
    EXPECT_EQ(morf_order(cam), (std::vector<Index>{1, 4, 2, 3, 0, 5}));
}

TEST(Morf, ConstantMapKeepsRowMajorOrder) {
    std::vector<Index> expect(20);
    std::iota(expect.begin(), expect.end(), Index{0});
    EXPECT_EQ(morf_order(Tensor::constant({4, 5}, 0.5f)), expect);
}

TEST(Morf, MatchesSelectionLoop) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor cam = Tensor::plane(8, 8);
        for (Index i = 0; i < 64; ++i) cam.data()[i] = static_cast<float>(level(rng)) / 5.0f;
        std::vector<bool> used(64, false);
        std::vector<Index> expect;
        for (int n = 0; n < 64; ++n) {
            Index best = -1;
            for (Index i = 0; i < 64; ++i)
                if (!used[static_cast<std::size_t>(i)] && (best < 0 || cam.data()[i] > cam.data()[best])) best = i;
            used[static_cast<std::size_t>(best)] = true;
            expect.push_back(best);
        }
        ASSERT_EQ(morf_order(cam), expect);
    }
}

TEST(Morf, StepPixelCounts) {
    EXPECT_EQ(pixels_at_step(0, 256), 0);
    EXPECT_EQ(pixels_at_step(1, 256), 2);
    EXPECT_EQ(pixels_at_step(50, 255), 127);
    EXPECT_EQ(pixels_at_step(100, 255), 255);
}

// ---------------------------------------------------------------------------
// curves

/// Records every image it is asked to evaluate.
class RecordingEngine final : public InferenceEngine {
public:
    explicit RecordingEngine(std::shared_ptr<InferenceEngine> inner) : inner_(std::move(inner)) {}
    ModelOutput forward_ablated(const Tensor& image, const AblationRequest& a) override {
        seen.push_back(image);
        return inner_->forward_ablated(image, a);
    }
    EngineDescriptor descriptor() const override { return inner_->descriptor(); }
    std::vector<Tensor> seen;

private:
    std::shared_ptr<InferenceEngine> inner_;
};

struct ToyCase {
    std::shared_ptr<ToyFcn> toy;
    Tensor image;
    Tensor cam;
    int class_id = -1;
};

std::vector<ToyCase> toy_cases(int count) {
    std::mt19937_64 rng(2);
    std::vector<ToyCase> out;
    for (std::uint64_t seed = 1; static_cast<int>(out.size()) < count && seed < 200; ++seed) {
        ToyCase tc{std::make_shared<ToyFcn>(seed), random_tensor(rng, {3, 16, 16}, 0, 1),
                   random_tensor(rng, {16, 16}, 0, 1), -1};
        const LabelMask pred = argmax_mask(tc.toy->forward(tc.image).main);
        for (int c = 1; c < 7; ++c)
            if (pred.count(c) > 0) tc.class_id = c;
        if (tc.class_id > 0) out.push_back(std::move(tc));
    }
    return out;
}

TEST(Curves, DeletionEndsAtUniformOnBiasFreeToy) {
    for (const auto& tc : toy_cases(5)) {
        const FaithfulnessCurve del = deletion_curve(*tc.toy, tc.image, tc.cam, tc.class_id, kOut);
        EXPECT_EQ(del.kind, CurveKind::deletion);
        EXPECT_NEAR(del.confidences[100], 1.0 / 7.0, 1e-12);
        EXPECT_NEAR(del.confidences[100], 0.1429, 5e-5);
        const FaithfulnessCurve ins = insertion_curve(*tc.toy, tc.image, tc.cam, tc.class_id, kOut);
        EXPECT_EQ(ins.kind, CurveKind::insertion);
        EXPECT_NEAR(ins.confidences[0], 1.0 / 7.0, 1e-12);
    }
}

TEST(Curves, EndpointsEqualUnperturbedScoreExactly) {
    for (const auto& tc : toy_cases(5)) {
        const Tensor fused = fused_logits(tc.toy->forward(tc.image), kOut);
        const double s = target_score(fused, TargetRegion::from_logits(fused, tc.class_id));
        const FaithfulnessCurve del = deletion_curve(*tc.toy, tc.image, tc.cam, tc.class_id, kOut);
        const FaithfulnessCurve ins = insertion_curve(*tc.toy, tc.image, tc.cam, tc.class_id, kOut);
        EXPECT_EQ(del.confidences[0], s);
        EXPECT_EQ(ins.confidences[100], s);
    }
}

TEST(Curves, ConstantEngineGivesFlatCurve) {
    Tensor main(3, 8, 8);
    main.channel_flat(2).setConstant(1.5f);
    testing::ConstantEngine engine({main, main, Tensor(2, 2, 2)});
    std::mt19937_64 rng(3);
    const Tensor img = random_tensor(rng, {3, 8, 8}, 0, 1);
    const Tensor cam = random_tensor(rng, {8, 8}, 0, 1);
    for (const auto& curve : {deletion_curve(engine, img, cam, 2, kOut), insertion_curve(engine, img, cam, 2, kOut)}) {
        for (double y : curve.confidences) EXPECT_EQ(y, curve.confidences[0]);
        EXPECT_NEAR(auc(curve), curve.confidences[0], 1e-12);
    }
}

TEST(Curves, DeletionAndInsertionImagesAreComplementary) {
    const auto cases = toy_cases(1);
    const ToyCase& tc = cases.front();
    RecordingEngine del_rec(tc.toy), ins_rec(tc.toy);
    deletion_curve(del_rec, tc.image, tc.cam, tc.class_id, kOut);
    insertion_curve(ins_rec, tc.image, tc.cam, tc.class_id, kOut);
    // deletion: reference forward, then steps 1..100; insertion: reference, then steps 0..100
    ASSERT_EQ(del_rec.seen.size(), 101u);
    ASSERT_EQ(ins_rec.seen.size(), 102u);
    for (int step = 1; step <= 100; ++step) {
        const Tensor& d = del_rec.seen[static_cast<std::size_t>(step)];
        const Tensor& i = ins_rec.seen[static_cast<std::size_t>(step + 1)];
        Tensor sum = d;
        sum.data() += i.data();
        ASSERT_EQ(sum, tc.image) << step;
        const Index zeroed = (d.data() == 0.0f).count() / 3;
        EXPECT_GE(zeroed, pixels_at_step(step, 256));
    }
}

TEST(Curves, MismatchedCamAndAbsentClassThrow) {
    const auto cases = toy_cases(1);
    const ToyCase& tc = cases.front();
    EXPECT_THROW(deletion_curve(*tc.toy, tc.image, Tensor::plane(8, 8), tc.class_id, kOut), ArgumentError);
    Tensor main(3, 8, 8);
    testing::ConstantEngine engine({main, main, Tensor(1, 2, 2)});
    EXPECT_THROW(insertion_curve(engine, Tensor(3, 8, 8), Tensor::plane(8, 8), 2, kOut), ClassAbsentError);
}

TEST(Curves, PlantedSignalSeparatesTrueAndInvertedSaliency) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> corner(0, 64 - 16);
    for (int scene = 0; scene < 3; ++scene) {
        testing::PlantedSignalEngine engine(corner(rng), corner(rng), 16);
        const Tensor img = random_tensor(rng, {3, 64, 64}, 0.2f, 1.0f);
        const Tensor truth = engine.saliency(64, 64, false), inverted = engine.saliency(64, 64, true);
        const double del_t = auc(deletion_curve(engine, img, truth, 1, kOut));
        const double del_i = auc(deletion_curve(engine, img, inverted, 1, kOut));
        const double ins_t = auc(insertion_curve(engine, img, truth, 1, kOut));
        const double ins_i = auc(insertion_curve(engine, img, inverted, 1, kOut));
        EXPECT_LT(del_t, del_i);
        EXPECT_GT(ins_t, ins_i);
    }
}

// ---------------------------------------------------------------------------
// AUC

std::vector<double> curve_of(auto f) {
    std::vector<double> y(101);
    for (int i = 0; i <= 100; ++i) y[static_cast<std::size_t>(i)] = f(i / 100.0);
    return y;
}

TEST(Auc, ConstantAndRamp) {
    for (double c : {0.0, 0.1429, 0.5, 1.0}) EXPECT_NEAR(auc(curve_of([c](double) { return c; })), c, 1e-9);
    EXPECT_NEAR(auc(curve_of([](double f) { return f; })), 0.5, 1e-9);
    EXPECT_NEAR(auc(curve_of([](double f) { return 1.0 - f; })), 0.5, 1e-9);
}

TEST(Auc, MatchesPairwiseTrapezoids) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> y(101);
        for (double& v : y) v = u(rng);
        double expect = 0.0;
        for (std::size_t i = 0; i < 100; ++i) expect += 0.01 * (y[i] + y[i + 1]) / 2.0;
        EXPECT_NEAR(auc(y), expect, 1e-12);
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        EXPECT_GE(auc(y), *lo - 1e-15);
        EXPECT_LE(auc(y), *hi + 1e-15);
    }
}

TEST(Auc, RequiresAllSamples) {
    EXPECT_THROW(auc(std::vector<double>(100, 0.5)), ArgumentError);
}

// ---------------------------------------------------------------------------
// class averages

TEST(ClassAverages, Examples) {
    const std::vector<AucPair> one{{0.2, 0.6}};
    const ClassAverage a = class_averaged_scores(one);
    EXPECT_DOUBLE_EQ(a.mean_deletion, 0.2);
    EXPECT_DOUBLE_EQ(a.mean_insertion, 0.6);
    EXPECT_TRUE(a.interpretable);
    EXPECT_DOUBLE_EQ(a.difference(), 0.4);

    const std::vector<AucPair> tie{{0.3, 0.3}};
    EXPECT_FALSE(class_averaged_scores(tie).interpretable);

    EXPECT_THROW(class_averaged_scores(std::vector<AucPair>{}), ArgumentError);
}

TEST(ClassAverages, MatchDirectMean) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<AucPair> v{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
        const ClassAverage a = class_averaged_scores(v);
        EXPECT_NEAR(a.mean_deletion, (v[0].deletion + v[1].deletion + v[2].deletion) / 3.0, 1e-15);
        EXPECT_NEAR(a.mean_insertion, (v[0].insertion + v[1].insertion + v[2].insertion) / 3.0, 1e-15);
        EXPECT_EQ(a.interpretable, a.mean_deletion < a.mean_insertion);
    }
}

}  // namespace
}  // namespace sprayeval
