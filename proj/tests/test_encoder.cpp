#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "amff/encoder.hpp"
#include "amff/error.hpp"
#include "oracles.hpp"

using namespace amff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "amff_test_encoder";
    fs::create_directories(dir);
    return dir;
}

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (double& p : img.pixels) p = rng.uniform();
    return img;
}

// Image whose value at (y, x) is 2y + x; bilinear sampling of it is exact.
Image ramp_2x2() {
    Image img(2, 2, 1);
    img.at(0, 0, 0) = 0;
    img.at(0, 1, 0) = 1;
    img.at(1, 0, 0) = 2;
    img.at(1, 1, 0) = 3;
    return img;
}

}  // namespace

TEST(Rescale, PaperScaleShapes) {
    const Image img(224, 224, 3, 0.5);
    const Image up = rescale_bilinear(img, 1.5), down = rescale_bilinear(img, 0.5);
    EXPECT_EQ(up.height, 336u);
    EXPECT_EQ(up.width, 336u);
    EXPECT_EQ(down.height, 112u);
    EXPECT_EQ(down.width, 112u);
    const MultiScaleImage msi = make_multiscale(img);
    EXPECT_EQ(msi.i_15.height, 336u);
    EXPECT_EQ(msi.i_05.width, 112u);
    EXPECT_EQ(msi.i_10, img);
}

TEST(Rescale, ConstantImageStaysConstant) {
    const Image img(9, 13, 3, 0.7);
    for (double factor : {0.5, 1.5, 2.0, 0.3}) {
        for (double p : rescale_bilinear(img, factor).pixels) EXPECT_NEAR(p, 0.7, 1e-15);
    }
}

TEST(Rescale, HalfPixelBilinearByHand) {
    // Source coordinate (i + 0.5) / 2 - 0.5 clamped to [0, 1]: 0, 0.25, 0.75, 1.
    const double s[4] = {0.0, 0.25, 0.75, 1.0};
    const Image out = rescale_bilinear(ramp_2x2(), 2.0);
    ASSERT_EQ(out.height, 4u);
    ASSERT_EQ(out.width, 4u);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at(y, x, 0), 2 * s[y] + s[x], 1e-15) << y << "," << x;
}

TEST(Rescale, RejectsBadInput) {
    EXPECT_THROW(rescale_bilinear(Image(4, 4, 1), 0.0), Error);
    EXPECT_THROW(rescale_bilinear(Image(4, 4, 2), 1.5), Error);
}

TEST(AdaptivePool, ConstantMap) {
    const FeatureMap out = adaptive_max_pool(FeatureMap(2, 14, 14, 0.3), 7, 7);
    EXPECT_EQ(out.height, 7u);
    EXPECT_EQ(out.width, 7u);
    for (double v : out.data) EXPECT_EQ(v, 0.3);
}

TEST(AdaptivePool, PreservesGlobalMax) {
    Rng rng(4);
    FeatureMap fm(3, 11, 9);
    for (double& v : fm.data) v = rng.normal();
    const FeatureMap out = adaptive_max_pool(fm, 4, 3);
    EXPECT_EQ(*std::max_element(out.data.begin(), out.data.end()), *std::max_element(fm.data.begin(), fm.data.end()));
}

TEST(AdaptivePool, MatchesEnumeratedWindows) {
    FeatureMap fm(1, 4, 4);
    const double vals[16] = {3, 9, 1, 4, 7, 2, 8, 6, 5, 15, 11, 0, 13, 10, 12, 14};
    std::copy(vals, vals + 16, fm.data.begin());
    const FeatureMap out = adaptive_max_pool(fm, 2, 2);
    EXPECT_EQ(out.at(0, 0, 0), 9);
    EXPECT_EQ(out.at(0, 0, 1), 8);
    EXPECT_EQ(out.at(0, 1, 0), 15);
    EXPECT_EQ(out.at(0, 1, 1), 14);
}

TEST(AdaptivePool, OverlappingWindowsForUnevenSizes) {
    Rng rng(8);
    FeatureMap fm(2, 5, 7);
    for (double& v : fm.data) v = rng.normal();
    const FeatureMap out = adaptive_max_pool(fm, 3, 4);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                const std::size_t y0 = i * 5 / 3, y1 = ((i + 1) * 5 + 2) / 3;
                const std::size_t x0 = j * 7 / 4, x1 = ((j + 1) * 7 + 3) / 4;
                double m = -1e300;
                for (std::size_t y = y0; y < y1; ++y)
                    for (std::size_t x = x0; x < x1; ++x) m = std::max(m, fm.at(c, y, x));
                EXPECT_EQ(out.at(c, i, j), m);
            }
}

TEST(Upsample, ToSevenBySeven) {
    const FeatureMap out = adapt_feature_map(FeatureMap(3, 4, 4, 1.0), 7, 7);
    EXPECT_EQ(out.channels, 3u);
    EXPECT_EQ(out.height, 7u);
    EXPECT_EQ(out.width, 7u);
    for (double v : out.data) EXPECT_NEAR(v, 1.0, 1e-15);
    EXPECT_EQ(adapt_feature_map(FeatureMap(1, 14, 14), 7, 7).height, 7u);
    EXPECT_THROW(adapt_feature_map(FeatureMap(1, 14, 4), 7, 7), Error);
}

TEST(Upsample, TwoByTwoToThreeByThreeByHand) {
    // Source coordinate (i + 0.5) * 2 / 3 - 0.5 clamped: 0, 0.5, 1.
    FeatureMap fm(1, 2, 2);
    fm.data = {0, 1, 2, 3};
    const FeatureMap out = bilinear_upsample(fm, 3, 3);
    const double s[3] = {0.0, 0.5, 1.0};
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) EXPECT_NEAR(out.at(0, y, x), 2 * s[y] + s[x], 1e-15);
}

TEST(ToyEncoder, DeterministicAndUnitNorm) {
    const Image img = random_image(40, 48, 3, 1);
    const ImageFeatures a = toy_encode(make_multiscale(img), 32);
    const ImageFeatures b = toy_encode(make_multiscale(img), 32);
    EXPECT_EQ(a.f_05, b.f_05);
    EXPECT_EQ(a.f_10, b.f_10);
    EXPECT_EQ(a.f_15, b.f_15);
    for (const Vec* v : {&a.f_05, &a.f_10, &a.f_15}) {
        EXPECT_EQ(v->size(), 32u);
        EXPECT_NEAR(norm2(*v), 1.0, 1e-12);
    }
    EXPECT_NE(a.f_05, a.f_15);
}

TEST(ToyEncoder, BrightnessShiftMovesMeansOnly) {
    const Image img = random_image(32, 32, 1, 2);
    Image brighter = img;
    for (double& p : brighter.pixels) p = std::min(1.0, p * 0.5 + 0.3);
    Image base = img;
    for (double& p : base.pixels) p = p * 0.5;
    const Vec sa = cell_statistics(base), sb = cell_statistics(brighter);
    ASSERT_EQ(sa.size(), 2 * kToyGrid * kToyGrid);
    const std::size_t cells = kToyGrid * kToyGrid;
    for (std::size_t k = 0; k < cells; ++k) {
        EXPECT_NEAR(sb[k] - sa[k], 0.3, 1e-12);
        EXPECT_NEAR(sb[cells + k], sa[cells + k], 1e-12);
    }
}

TEST(ToyEncoder, CellStatisticsMatchDirectComputation) {
    const Image img = random_image(32, 32, 1, 3);
    const Vec stats = cell_statistics(img);
    // Cell (1, 2) covers rows 2..3 and columns 4..5.
    double sum = 0.0, sq = 0.0;
    for (std::size_t y = 2; y < 4; ++y)
        for (std::size_t x = 4; x < 6; ++x) sum += img.at(y, x, 0);
    const double mean = sum / 4.0;
    for (std::size_t y = 2; y < 4; ++y)
        for (std::size_t x = 4; x < 6; ++x) sq += (img.at(y, x, 0) - mean) * (img.at(y, x, 0) - mean);
    EXPECT_NEAR(stats[1 * kToyGrid + 2], mean, 1e-15);
    EXPECT_NEAR(stats[kToyGrid * kToyGrid + 1 * kToyGrid + 2], std::sqrt(sq / 4.0), 1e-15);
}

TEST(ToyEncoder, TooSmallImageIsRejected) { EXPECT_THROW(toy_encode_image(Image(8, 8, 1), 16), Error); }

TEST(TextEncoder, DeterministicUnitNormAndDiscriminative) {
    const Vec a = toy_encode_text("a cat on a mat", 64);
    EXPECT_EQ(a, toy_encode_text("a cat on a mat", 64));
    EXPECT_NEAR(norm2(a), 1.0, 1e-12);
    const Vec cat = toy_encode_text("cat", 64), dog = toy_encode_text("dog", 64);
    EXPECT_LT(oracle::cosine(cat, dog), 1.0);
    EXPECT_THROW(toy_encode_text("", 64), Error);
    EXPECT_NEAR(norm2(toy_encode_text("x", 64)), 1.0, 1e-12);
}

TEST(Pnm, BinaryRoundTrip) {
    for (std::size_t channels : {1u, 3u}) {
        Image img = random_image(5, 7, channels, 9 + channels);
        for (double& p : img.pixels) p = std::round(p * 255.0) / 255.0;
        const fs::path path = temp_dir() / (channels == 1 ? "rt.pgm" : "rt.ppm");
        write_pnm(img, path);
        const Image back = read_pnm(path);
        ASSERT_EQ(back.height, 5u);
        ASSERT_EQ(back.channels, channels);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 1e-15);
    }
}

TEST(Pnm, AsciiWithComments) {
    const Image img = decode_pnm("P2\n# comment\n3 2\n4\n0 1 2\n3 4 0\n");
    EXPECT_EQ(img.width, 3u);
    EXPECT_EQ(img.height, 2u);
    EXPECT_DOUBLE_EQ(img.at(1, 1, 0), 1.0);
    EXPECT_DOUBLE_EQ(img.at(0, 2, 0), 0.5);
    EXPECT_THROW(decode_pnm("P9\n1 1\n255\n0"), Error);
    EXPECT_THROW(decode_pnm("P2\n2 2\n255\n0 1 2"), Error);
}

TEST(Manifest, EncodesListedImages) {
    const fs::path dir = temp_dir() / "manifest";
    fs::create_directories(dir);
    write_pnm(random_image(40, 40, 3, 21), dir / "one.ppm");
    write_pnm(random_image(36, 44, 1, 22), dir / "two.pgm");
    {
        std::ofstream m(dir / "manifest.csv");
        m << "file,prompt,generator,q_v,q_a,q_c\n";
        m << "one.ppm,\"a red, round apple\",genA,3.5,,0.8\n";
        m << "two.pgm,a grey cat,genB,2,4,\n";
    }
    const Dataset ds = encode_manifest(dir, dir / "manifest.csv", 16);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.dim(), 16u);
    EXPECT_EQ(ds.samples[0].prompt, "a red, round apple");
    EXPECT_EQ(ds.samples[0].labels, (Labels{3.5, std::nullopt, 0.8}));
    EXPECT_EQ(ds.samples[1].labels, (Labels{2.0, 4.0, std::nullopt}));
    EXPECT_EQ(ds.samples[1].features.f_text, toy_encode_text("a grey cat", 16));
    EXPECT_THROW(encode_manifest(dir, dir / "missing.csv", 16), Error);
}
