#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "amff/aff.hpp"
#include "amff/error.hpp"
#include "oracles.hpp"

using namespace amff;

namespace {

AffParams random_params(std::size_t d, std::size_t h, Rng& rng, double scale = 2.0) {
    AffParams p = AffParams::init(d, h, rng);
    for (double& x : p.w1.data) x *= scale;
    for (double& x : p.w2.data) x *= scale;
    p.b1 = random_normal(rng, h, 0.3);
    p.b2 = random_normal(rng, d, 0.3);
    return p;
}

double block_error(AffParams& p, std::size_t block, const Vec& f05, const Vec& f10, const Vec& f15, const Vec& r,
                   const AffGrads& g) {
    auto pb = p.blocks();
    const auto gb = g.params.blocks();
    const Vec saved(pb[block].values.begin(), pb[block].values.end());
    const double err = finite_diff_check(
        [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), pb[block].values.begin());
            return dot(r, aff_forward(f05, f10, f15, p).fused);
        },
        saved, gb[block].values);
    std::copy(saved.begin(), saved.end(), pb[block].values.begin());
    return err;
}

}  // namespace

TEST(AffInit, ShapesAndZeroBiases) {
    Rng rng(0);
    const AffParams p = AffParams::init(10, 6, rng);
    EXPECT_EQ(p.w1.rows, 6u);
    EXPECT_EQ(p.w1.cols, 10u);
    EXPECT_EQ(p.w2.rows, 10u);
    EXPECT_EQ(p.w2.cols, 6u);
    EXPECT_EQ(p.b1, Vec(6, 0.0));
    EXPECT_EQ(p.b2, Vec(10, 0.0));
    const double bound = std::sqrt(6.0 / 16.0);
    for (double w : p.w1.data) EXPECT_LE(std::abs(w), bound);
    EXPECT_EQ(p.blocks().size(), 4u);
    EXPECT_EQ(p.blocks()[0].name, "aff.w1");
}

TEST(AffForward, EqualInputsReproduceTheInput) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const AffParams p = random_params(16, 8, rng);
        const Vec f = random_normal(rng, 16, 3.0);
        const AffOutput out = aff_forward(f, f, f, p);
        EXPECT_EQ(out.fused, f);
        for (std::size_t c = 0; c < 16; ++c)
            for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out.cache.weights(k, c), 1.0 / 3.0);
    }
}

TEST(AffForward, WeightsOnSimplexAndFusedInEnvelope) {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const AffParams p = random_params(12, 6, rng, 4.0);
        const Vec a = random_normal(rng, 12, 5.0), b = random_normal(rng, 12, 5.0), c = random_normal(rng, 12, 5.0);
        const AffOutput out = aff_forward(a, b, c, p);
        for (std::size_t ch = 0; ch < 12; ++ch) {
            double sum = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                EXPECT_GE(out.cache.weights(k, ch), 0.0);
                sum += out.cache.weights(k, ch);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
            EXPECT_GE(out.fused[ch], std::min({a[ch], b[ch], c[ch]}));
            EXPECT_LE(out.fused[ch], std::max({a[ch], b[ch], c[ch]}));
        }
    }
}

TEST(AffForward, MatchesLoopOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const AffParams p = random_params(20, 7, rng);
        const Vec a = random_normal(rng, 20), b = random_normal(rng, 20), c = random_normal(rng, 20);
        const AffOutput out = aff_forward(a, b, c, p);
        const oracle::AffResult want = oracle::aff(a, b, c, p);
        for (std::size_t ch = 0; ch < 20; ++ch) {
            EXPECT_NEAR(out.fused[ch], want.fused[ch], 1e-12);
            for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out.cache.weights(k, ch), want.weights[k][ch], 1e-12);
        }
    }
}

TEST(AffForward, PermutingInputsPermutesWeights) {
    Rng rng(4);
    const AffParams p = random_params(9, 5, rng);
    const Vec a = random_normal(rng, 9), b = random_normal(rng, 9), c = random_normal(rng, 9);
    const AffOutput abc = aff_forward(a, b, c, p);
    const AffOutput cab = aff_forward(c, a, b, p);
    for (std::size_t ch = 0; ch < 9; ++ch) {
        EXPECT_NEAR(cab.cache.weights(0, ch), abc.cache.weights(2, ch), 1e-15);
        EXPECT_NEAR(cab.cache.weights(1, ch), abc.cache.weights(0, ch), 1e-15);
        EXPECT_NEAR(cab.cache.weights(2, ch), abc.cache.weights(1, ch), 1e-15);
        EXPECT_NEAR(cab.fused[ch], abc.fused[ch], 1e-12);
    }
}

TEST(AffForward, DimensionMismatchThrows) {
    Rng rng(5);
    const AffParams p = AffParams::init(8, 4, rng);
    EXPECT_THROW(aff_forward(Vec(8), Vec(7), Vec(8), p), Error);
    EXPECT_THROW(aff_forward(Vec(6), Vec(6), Vec(6), p), Error);
}

TEST(AffBackward, EveryBlockMatchesFiniteDifferences) {
    for (std::uint64_t seed : {0, 1, 2}) {
        Rng rng(seed);
        AffParams p = random_params(14, 6, rng);
        const Vec a = random_normal(rng, 14), b = random_normal(rng, 14), c = random_normal(rng, 14);
        const Vec r = random_normal(rng, 14);
        const AffGrads g = aff_backward(aff_forward(a, b, c, p).cache, p, r);
        for (std::size_t block = 0; block < 4; ++block) EXPECT_LT(block_error(p, block, a, b, c, r, g), 1e-4);
        auto loss_wrt = [&](int which) {
            return [&, which](std::span<const double> x) {
                const Vec v(x.begin(), x.end());
                const AffOutput o = which == 0 ? aff_forward(v, b, c, p)
                                  : which == 1 ? aff_forward(a, v, c, p)
                                               : aff_forward(a, b, v, p);
                return dot(r, o.fused);
            };
        };
        EXPECT_LT(finite_diff_check(loss_wrt(0), a, g.df_05), 1e-4);
        EXPECT_LT(finite_diff_check(loss_wrt(1), b, g.df_10), 1e-4);
        EXPECT_LT(finite_diff_check(loss_wrt(2), c, g.df_15), 1e-4);
    }
}

TEST(AffBackward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(6);
    const AffParams p = random_params(10, 4, rng);
    const Vec a = random_normal(rng, 10), b = random_normal(rng, 10), c = random_normal(rng, 10);
    const AffGrads g = aff_backward(aff_forward(a, b, c, p).cache, p, Vec(10, 0.0));
    for (const auto& blk : g.params.blocks())
        for (double v : blk.values) EXPECT_EQ(v, 0.0);
    for (const Vec* v : {&g.df_05, &g.df_10, &g.df_15})
        for (double x : *v) EXPECT_EQ(x, 0.0);
}

TEST(AffBackward, IdenticalInputsMatchFiniteDifferences) {
    Rng rng(7);
    const AffParams p = random_params(10, 5, rng);
    const Vec f = random_normal(rng, 10), r = random_normal(rng, 10);
    const AffGrads g = aff_backward(aff_forward(f, f, f, p).cache, p, r);
    // Moving all three inputs together leaves the weights at 1/3, so the summed
    // input gradient equals the upstream gradient.
    for (std::size_t c = 0; c < 10; ++c) EXPECT_NEAR(g.df_05[c] + g.df_10[c] + g.df_15[c], r[c], 1e-12);
    const double err = finite_diff_check(
        [&](std::span<const double> x) {
            const Vec v(x.begin(), x.end());
            return dot(r, aff_forward(v, f, f, p).fused);
        },
        f, g.df_05);
    EXPECT_LT(err, 1e-4);
}

TEST(AffBackward, AccumulatesIntoExistingGradients) {
    Rng rng(8);
    const AffParams p = random_params(6, 3, rng);
    const Vec a = random_normal(rng, 6), b = random_normal(rng, 6), c = random_normal(rng, 6), r = random_normal(rng, 6);
    const AffCache cache = aff_forward(a, b, c, p).cache;
    AffGrads twice{AffParams::zeros(6, 3), {}, {}, {}};
    aff_backward(cache, p, r, twice);
    aff_backward(cache, p, r, twice);
    const AffGrads once = aff_backward(cache, p, r);
    for (std::size_t i = 0; i < once.params.w1.data.size(); ++i)
        EXPECT_NEAR(twice.params.w1.data[i], 2.0 * once.params.w1.data[i], 1e-14);
    EXPECT_EQ(twice.df_05, once.df_05);
}
