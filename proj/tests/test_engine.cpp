#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "sprayeval/engine.hpp"
#include "support.hpp"

namespace sprayeval {
namespace {

using testing::random_tensor;

Tensor random_image(std::mt19937_64& rng, Index h, Index w) { return random_tensor(rng, {3, h, w}, 0.0f, 1.0f); }

TEST(SplitMix, KnownSequence) {
    std::uint64_t s = 0;
    EXPECT_EQ(splitmix64(s), 0xE220A8397B1DCDAFull);
    EXPECT_EQ(splitmix64(s), 0x6E789E6AA1B965F4ull);
}

TEST(ToyWeights, DrawnInDocumentedOrder) {
    const auto w = ToyFcnWeights::from_seed(42);
    std::uint64_t s = 42;
    const float first = static_cast<float>(static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53 - 0.5);
    EXPECT_EQ(w.conv1(0, 0), first);
    EXPECT_EQ(w.conv1.rows(), 8);
    EXPECT_EQ(w.conv1.cols(), 27);
    EXPECT_EQ(w.aux_head.rows(), 7);
    EXPECT_EQ(w.conv2.cols(), 72);
    EXPECT_EQ(w.main_head.cols(), 8);
    EXPECT_LE(w.conv2.maxCoeff(), 0.5f);
    EXPECT_GE(w.conv2.minCoeff(), -0.5f);
}

TEST(ToyFcnTest, OutputShapes) {
    std::mt19937_64 rng(1);
    ToyFcn toy(7);
    const ModelOutput o = toy.forward(random_image(rng, 20, 13));
    EXPECT_EQ(o.main.shape(), (std::vector<Index>{7, 20, 13}));
    EXPECT_EQ(o.aux.shape(), (std::vector<Index>{7, 10, 7}));
    EXPECT_EQ(o.activations.shape(), (std::vector<Index>{8, 5, 4}));
    EXPECT_EQ(toy.descriptor().num_classes, 7);
    EXPECT_EQ(toy.descriptor().num_activations, 8);
}

TEST(ToyFcnTest, ZeroImageGivesZeroOutputs) {
    const ModelOutput o = toy_fcn_forward(Tensor(3, 16, 16), 3);
    EXPECT_TRUE((o.activations.data() == 0.0f).all());
    EXPECT_TRUE((o.main.data() == 0.0f).all());
    EXPECT_TRUE((o.aux.data() == 0.0f).all());
}

TEST(ToyFcnTest, EmptyAblationEqualsForward) {
    std::mt19937_64 rng(2);
    ToyFcn toy(9);
    const Tensor img = random_image(rng, 16, 16);
    const ModelOutput a = toy.forward(img);
    const ModelOutput b = toy.forward_ablated(img, AblationRequest{});
    EXPECT_EQ(a.main, b.main);
    EXPECT_EQ(a.aux, b.aux);
    EXPECT_EQ(a.activations, b.activations);
}

TEST(ToyFcnTest, FullAblationKillsMainLogits) {
    std::mt19937_64 rng(3);
    ToyFcn toy(10);
    const ModelOutput o = toy.forward_ablated(random_image(rng, 16, 16), AblationRequest({0, 1, 2, 3, 4, 5, 6, 7}));
    EXPECT_TRUE((o.main.data() == 0.0f).all());
}

TEST(ToyFcnTest, DeterministicAcrossInstances) {
    std::mt19937_64 rng(4);
    const Tensor img = random_image(rng, 24, 24);
    const ModelOutput a = toy_fcn_forward(img, 123);
    const ModelOutput b = toy_fcn_forward(img, 123);
    EXPECT_LT((a.main.data() - b.main.data()).abs().maxCoeff(), 1e-6f);
    EXPECT_EQ(a.main, b.main);
}

TEST(ToyFcnTest, RejectsSmallOrMalformedImages) {
    ToyFcn toy(1);
    EXPECT_THROW(toy.forward(Tensor(3, 7, 16)), ContractError);
    EXPECT_THROW(toy.forward(Tensor(1, 16, 16)), ContractError);
    EXPECT_THROW(toy.forward_ablated(Tensor(3, 16, 16), AblationRequest({8})), ContractError);
}

// Direct loop convolution used as the oracle for the im2col path.
Tensor conv_oracle(const Tensor& in, const ToyFcnWeights::Matrix& w) {
    const Index oh = (in.height() + 1) / 2, ow = (in.width() + 1) / 2;
    Tensor out(w.rows(), oh, ow);
    for (Index o = 0; o < w.rows(); ++o)
        for (Index y = 0; y < oh; ++y)
            for (Index x = 0; x < ow; ++x) {
                double acc = 0.0;
                for (Index c = 0; c < in.channels(); ++c)
                    for (Index ky = 0; ky < 3; ++ky)
                        for (Index kx = 0; kx < 3; ++kx) {
                            const Index sy = 2 * y + ky - 1, sx = 2 * x + kx - 1;
                            if (sy < 0 || sx < 0 || sy >= in.height() || sx >= in.width()) continue;
                            acc += static_cast<double>(w(o, (c * 3 + ky) * 3 + kx)) * in(c, sy, sx);
                        }
                out(o, y, x) = static_cast<float>(std::max(acc, 0.0));
            }
    return out;
}

TEST(Conv, MatchesDirectLoop) {
    std::mt19937_64 rng(5);
    const auto w = ToyFcnWeights::from_seed(77);
    for (auto [h, wd] : {std::pair{8, 8}, {9, 13}, {16, 5}}) {
        const Tensor img = random_image(rng, h, wd);
        const Tensor fast = conv3x3_s2_relu(img, w.conv1);
        const Tensor slow = conv_oracle(img, w.conv1);
        ASSERT_EQ(fast.shape(), slow.shape());
        EXPECT_LT((fast.data() - slow.data()).abs().maxCoeff(), 1e-5f);
    }
}

TEST(ToyFcnTest, AblationMatchesIndependentHeadOnMaskedActivations) {
    std::mt19937_64 rng(6);
    ToyFcn toy(31);
    const auto& head = toy.weights().main_head;
    std::bernoulli_distribution pick(0.4);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor img = random_image(rng, 16, 20);
        std::vector<std::uint32_t> ids;
        for (std::uint32_t k = 0; k < 8; ++k)
            if (pick(rng)) ids.push_back(k);
        const ModelOutput full = toy.forward(img);
        Tensor masked = full.activations;
        for (auto k : ids) masked.channel_flat(k).setZero();
        Tensor logits(7, masked.height(), masked.width());
        for (Index c = 0; c < 7; ++c)
            for (Index p = 0; p < masked.plane_size(); ++p) {
                double acc = 0.0;
                for (Index k = 0; k < 8; ++k) acc += static_cast<double>(head(c, k)) * masked.data()[k * masked.plane_size() + p];
                logits.data()[c * masked.plane_size() + p] = static_cast<float>(acc);
            }
        const Tensor expect = bilinear_resize(logits, 16, 20);
        const ModelOutput ablated = toy.forward_ablated(img, AblationRequest(ids));
        EXPECT_LT((ablated.main.data() - expect.data()).abs().maxCoeff(), 1e-5f);
    }
}

TEST(AblationRequestTest, Validation) {
    EXPECT_THROW(AblationRequest({1, 2, 1}), ContractError);
    const AblationRequest r({5, 1, 3});
    EXPECT_EQ(r.channels(), (std::vector<std::uint32_t>{1, 3, 5}));
    EXPECT_NO_THROW(r.check_range(6));
    EXPECT_THROW(r.check_range(5), ContractError);
}

TEST(Cache, IdenticalForwardsHitInnerOnce) {
    auto counting = std::make_shared<testing::CountingEngine>(std::make_shared<ToyFcn>(1));
    auto cached = cached_engine(counting, 8);
    std::mt19937_64 rng(7);
    const Tensor img = random_image(rng, 16, 16);
    const ModelOutput a = cached->forward(img);
    const ModelOutput b = cached->forward(img);
    EXPECT_EQ(counting->calls, 1);
    EXPECT_EQ(a.main, b.main);
    cached->forward_ablated(img, AblationRequest({2}));
    EXPECT_EQ(counting->calls, 2);
}

TEST(Cache, ZeroCapacityAlwaysForwards) {
    auto counting = std::make_shared<testing::CountingEngine>(std::make_shared<ToyFcn>(1));
    auto cached = cached_engine(counting, 0);
    const Tensor img(3, 8, 8);
    for (int i = 0; i < 3; ++i) cached->forward(img);
    EXPECT_EQ(counting->calls, 3);
}

TEST(Cache, EvictsLeastRecentlyUsed) {
    auto counting = std::make_shared<testing::CountingEngine>(std::make_shared<ToyFcn>(1));
    CachedEngine cached(counting, 2);
    std::mt19937_64 rng(8);
    const Tensor a = random_image(rng, 8, 8), b = random_image(rng, 8, 8), c = random_image(rng, 8, 8);
    cached.forward(a);
    cached.forward(b);
    cached.forward(a);  // a is now most recent
    cached.forward(c);  // evicts b
    EXPECT_EQ(counting->calls, 3);
    cached.forward(a);
    EXPECT_EQ(counting->calls, 3);
    cached.forward(b);
    EXPECT_EQ(counting->calls, 4);
    EXPECT_EQ(cached.size(), 2u);
}

TEST(Cache, RandomQueriesMatchUncachedEngine) {
    auto toy = std::make_shared<ToyFcn>(5);
    ToyFcn reference(5);
    CachedEngine cached(toy, 16);
    std::mt19937_64 rng(9);
    std::vector<Tensor> pool;
    for (int i = 0; i < 12; ++i) pool.push_back(random_image(rng, 8, 8));
    std::uniform_int_distribution<int> which(0, 11), chan(0, 8);
    for (int q = 0; q < 1000; ++q) {
        const Tensor& img = pool[static_cast<std::size_t>(which(rng))];
        const int k = chan(rng);
        const AblationRequest ab = k == 8 ? AblationRequest{} : AblationRequest({static_cast<std::uint32_t>(k)});
        const ModelOutput got = cached.forward_ablated(img, ab);
        const ModelOutput want = reference.forward_ablated(img, ab);
        ASSERT_EQ(got.main, want.main);
        ASSERT_EQ(got.activations, want.activations);
    }
    EXPECT_GT(cached.hits(), 0u);
}

TEST(Cache, HashSeparatesAblationSets) {
    const Tensor img(3, 8, 8);
    EXPECT_NE(CachedEngine::content_hash(img, AblationRequest{}), CachedEngine::content_hash(img, AblationRequest({0})));
    EXPECT_NE(CachedEngine::content_hash(img, AblationRequest({0, 1})), CachedEngine::content_hash(img, AblationRequest({1})));
}

TEST(Cache, SharedAcrossThreads) {
    auto cached = cached_engine(std::make_shared<ToyFcn>(3), 4);
    std::mt19937_64 rng(10);
    const Tensor img = random_image(rng, 16, 16);
    const ModelOutput want = ToyFcn(3).forward(img);
    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&] {
            for (int i = 0; i < 25; ++i)
                if (!(cached->forward(img).main == want.main)) ++mismatches;
        });
    }
    for (auto& w : workers) w.join();
    EXPECT_EQ(mismatches.load(), 0);
}

}  // namespace
}  // namespace sprayeval
