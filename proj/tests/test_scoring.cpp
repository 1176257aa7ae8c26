#include <gtest/gtest.h>

#include <cmath>

#include "amff/error.hpp"
#include "amff/gradcheck.hpp"
#include "amff/scoring.hpp"
#include "amff/trainer.hpp"
#include "oracles.hpp"

using namespace amff;

namespace {

MlpParams random_mlp(std::size_t d, std::size_t h, Rng& rng) {
    MlpParams p = MlpParams::init(d, h, rng);
    p.b1 = random_normal(rng, h, 0.3);
    p.b2 = random_normal(rng, 1, 0.3);
    return p;
}

FeatureBundle random_bundle(std::size_t d, Rng& rng) {
    return {random_normal(rng, d), random_normal(rng, d), random_normal(rng, d), random_normal(rng, d)};
}

Vec unit(std::size_t d, std::size_t k) {
    Vec v(d, 0.0);
    v[k] = 1.0;
    return v;
}

}  // namespace

TEST(Mlp, ZeroParamsGiveZero) {
    EXPECT_EQ(mlp_forward(MlpParams::zeros(5, 3), Vec{1, -2, 3, 4, 5}).y, 0.0);
}

TEST(Mlp, IdentityLayerSumsNonnegativeInput) {
    MlpParams p = MlpParams::zeros(4, 4);
    p.w1 = Mat::identity(4);
    p.w2 = Mat(1, 4, 1.0);
    EXPECT_DOUBLE_EQ(mlp_forward(p, Vec{0.5, 1, 2, 0}).y, 3.5);
}

TEST(Mlp, MatchesLoopOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpParams p = random_mlp(9, 6, rng);
        const Vec x = random_normal(rng, 9);
        EXPECT_NEAR(mlp_forward(p, x).y, oracle::mlp(p, x), 1e-12);
    }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
    Rng rng(2);
    MlpParams p = random_mlp(8, 5, rng);
    const Vec x = random_normal(rng, 8);
    MlpParams g = MlpParams::zeros(8, 5);
    const Vec dx = mlp_backward(mlp_forward(p, x).cache, p, 1.0, g);
    auto pb = p.blocks("head");
    const auto gb = g.blocks("head");
    for (std::size_t b = 0; b < pb.size(); ++b) {
        const Vec saved(pb[b].values.begin(), pb[b].values.end());
        const double err = finite_diff_check(
            [&](std::span<const double> v) {
                std::copy(v.begin(), v.end(), pb[b].values.begin());
                return mlp_forward(p, x).y;
            },
            saved, gb[b].values);
        std::copy(saved.begin(), saved.end(), pb[b].values.begin());
        EXPECT_LT(err, 1e-4) << pb[b].name;
    }
    EXPECT_LT(finite_diff_check([&](std::span<const double> v) { return mlp_forward(p, v).y; }, x, dx), 1e-4);
}

TEST(Mlp, ZeroUpstreamGivesZeroGradients) {
    Rng rng(3);
    const MlpParams p = random_mlp(6, 4, rng);
    MlpParams g = MlpParams::zeros(6, 4);
    const Vec dx = mlp_backward(mlp_forward(p, random_normal(rng, 6)).cache, p, 0.0, g);
    for (double v : dx) EXPECT_EQ(v, 0.0);
    for (const auto& b : g.blocks("h"))
        for (double v : b.values) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, DeadReluBlocksInputAndFirstLayerGradients) {
    Rng rng(4);
    MlpParams p = random_mlp(6, 4, rng);
    p.b1 = Vec(4, -100.0);
    MlpParams g = MlpParams::zeros(6, 4);
    const Vec dx = mlp_backward(mlp_forward(p, random_normal(rng, 6)).cache, p, 1.7, g);
    for (double v : dx) EXPECT_EQ(v, 0.0);
    for (double v : g.w1.data) EXPECT_EQ(v, 0.0);
    for (double v : g.b1) EXPECT_EQ(v, 0.0);
    for (double v : g.w2.data) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(g.b2[0], 1.7);
}

TEST(Similarity, WorkedCases) {
    const Vec t{0.3, -1.2, 2.0};
    EXPECT_NEAR(similarity_score(t, t, Similarity::Cosine).score, 1.0, 1e-15);
    const Vec e0 = unit(4, 0), e1 = unit(4, 1);
    EXPECT_NEAR(similarity_score(e0, e1, Similarity::Cosine).score, 0.0, 1e-15);
    EXPECT_NEAR(similarity_score(e0, e1, Similarity::Euclidean).score, -std::sqrt(2.0), 1e-15);
    const Vec neg{-0.3, 1.2, -2.0};
    EXPECT_NEAR(similarity_score(neg, t, Similarity::Cosine).score, -1.0, 1e-15);
    EXPECT_NEAR(similarity_score(neg, t, Similarity::Manhattan).score, -2.0 * (0.3 + 1.2 + 2.0), 1e-14);
}

TEST(Similarity, GradientsMatchFiniteDifferences) {
    Rng rng(5);
    for (Similarity kind : {Similarity::Cosine, Similarity::Euclidean, Similarity::Manhattan}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Vec img = random_normal(rng, 10), text = random_normal(rng, 10);
            const auto res = similarity_score(img, text, kind);
            const double err = finite_diff_check(
                [&](std::span<const double> v) { return similarity_score(v, text, kind).score; }, img, res.grad_img);
            EXPECT_LT(err, 1e-4) << similarity_name(kind);
        }
    }
}

TEST(Similarity, ParseNames) {
    EXPECT_EQ(parse_similarity("cosine"), Similarity::Cosine);
    EXPECT_EQ(parse_similarity("euclidean"), Similarity::Euclidean);
    EXPECT_EQ(parse_similarity("manhattan"), Similarity::Manhattan);
    EXPECT_THROW(parse_similarity("dot"), Error);
    EXPECT_THROW(similarity_score(Vec(3, 0.0), Vec{1, 0, 0}, Similarity::Cosine), Error);
}

TEST(Model, AlignedFeaturesScoreOneUnderCosine) {
    Rng rng(6);
    const ModelParams p = ModelParams::init(8, rng, 6, 6);
    Vec f = random_normal(rng, 8);
    const double n = norm2(f);
    for (double& x : f) x /= n;
    const ModelOutput out = model_forward(FeatureBundle{f, f, f, f}, p);
    EXPECT_NEAR(out.scores.s_c, 1.0, 1e-12);
}

TEST(Model, ZeroHeadsGiveZeroQualityAndAuthenticity) {
    Rng rng(7);
    ModelParams p = ModelParams::init(8, rng, 6, 6);
    p.head_v = MlpParams::zeros(8, 6);
    p.head_a = MlpParams::zeros(8, 6);
    const ModelOutput out = model_forward(random_bundle(8, rng), p);
    EXPECT_EQ(out.scores.s_v, 0.0);
    EXPECT_EQ(out.scores.s_a, 0.0);
}

TEST(Model, MatchesComposedComponentOracles) {
    Rng rng(8);
    ModelParams p = ModelParams::init(12, rng, 7, 5);
    p.aff.b2 = random_normal(rng, 12, 0.5);
    p.head_v = random_mlp(12, 5, rng);
    p.head_a = random_mlp(12, 5, rng);
    for (int trial = 0; trial < 10; ++trial) {
        const FeatureBundle f = random_bundle(12, rng);
        const ModelOutput out = model_forward(f, p);
        const Vec fused = oracle::aff(f.f_05, f.f_10, f.f_15, p.aff).fused;
        EXPECT_NEAR(out.scores.s_c, oracle::cosine(fused, f.f_text), 1e-12);
        EXPECT_NEAR(out.scores.s_v, oracle::mlp(p.head_v, fused), 1e-12);
        EXPECT_NEAR(out.scores.s_a, oracle::mlp(p.head_a, fused), 1e-12);
    }
}

TEST(Model, ParameterCountAndBlocks) {
    Rng rng(9);
    const ModelParams p = ModelParams::init(10, rng, 4, 3);
    // AFF: 4x10 + 4 + 10x4 + 10; each head: 3x10 + 3 + 3 + 1.
    EXPECT_EQ(p.parameter_count(), 94u + 2u * 37u);
    EXPECT_EQ(p.blocks().size(), 12u);
    EXPECT_THROW(model_forward(FeatureBundle{Vec(9), Vec(9), Vec(9), Vec(9)}, p), Error);
}

TEST(Ablation, NoAffWithEqualScalesReturnsTheFeature) {
    Rng rng(10);
    const ModelParams p = ModelParams::init(8, rng, 4, 4);
    const Vec f = random_normal(rng, 8);
    const FeatureBundle b{random_normal(rng, 8), f, f, f};
    FusionOptions flags;
    flags.use_aff = false;
    EXPECT_EQ(fuse_features(b, p.aff, flags), f);
    flags.plain_sum = true;
    const Vec summed = fuse_features(b, p.aff, flags);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(summed[c], 3.0 * f[c]);
}

TEST(Ablation, NoMsiGivesUniformWeights) {
    Rng rng(11);
    ModelParams p = ModelParams::init(8, rng, 4, 4);
    p.aff.b2 = random_normal(rng, 8);
    const FeatureBundle b = random_bundle(8, rng);
    FusionOptions flags;
    flags.use_msi = false;
    const ModelOutput out = model_forward(b, p, flags);
    ASSERT_TRUE(out.cache.aff.has_value());
    for (double w : out.cache.aff->weights.data) EXPECT_EQ(w, 1.0 / 3.0);
    EXPECT_EQ(out.cache.fused, b.f_10);
    const ScoreTriple s = ablation_variant_forward(b, p, flags);
    EXPECT_EQ(s.s_v, out.scores.s_v);
}

TEST(Model, BackwardUnderAblationsMatchesFiniteDifferences) {
    for (FusionOptions flags : {FusionOptions{true, true, false}, FusionOptions{false, true, false},
                                FusionOptions{true, false, false}, FusionOptions{true, false, true}}) {
        Rng rng(12);
        ModelParams p = ModelParams::init(6, rng, 4, 4, Similarity::Euclidean);
        p.aff.b1 = random_normal(rng, 4, 0.3);
        const FeatureBundle b = random_bundle(6, rng);
        const ScoreTriple d{0.7, -1.3, 0.4};
        ModelParams g = ModelParams::zeros_like(p);
        model_backward(model_forward(b, p, flags).cache, p, d, g);
        auto pb = p.blocks();
        const auto gb = g.blocks();
        for (std::size_t k = 0; k < pb.size(); ++k) {
            const Vec saved(pb[k].values.begin(), pb[k].values.end());
            const double err = finite_diff_check(
                [&](std::span<const double> v) {
                    std::copy(v.begin(), v.end(), pb[k].values.begin());
                    const ScoreTriple s = model_forward(b, p, flags).scores;
                    return d.s_c * s.s_c + d.s_v * s.s_v + d.s_a * s.s_a;
                },
                saved, gb[k].values);
            std::copy(saved.begin(), saved.end(), pb[k].values.begin());
            EXPECT_LT(err, 1e-4) << pb[k].name;
        }
    }
}

TEST(Gradcheck, SuiteIsBelowTolerance) {
    for (std::uint64_t seed : {0, 1, 2}) {
        const auto entries = run_gradcheck(seed);
        EXPECT_GE(entries.size(), 20u);
        for (const auto& e : entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.name << " seed " << seed;
    }
}
