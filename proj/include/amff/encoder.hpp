#pragma once

// Multi-scale preprocessing, backbone feature-map size adapters and a
// deterministic stand-in encoder for images and prompts.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "amff/dataio.hpp"
#include "amff/tensor.hpp"

namespace amff {

/// Interleaved pixels in [0, 1]; channels is 1 or 3.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
    void validate() const;

    bool operator==(const Image&) const = default;
};

struct MultiScaleImage {
    Image i_15;
    Image i_10;
    Image i_05;
};

/// Planar (channel, height, width) feature map.
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

/// Output size round-half-up(factor * size); half-pixel-centred bilinear sampling.
Image rescale_bilinear(const Image& img, double factor);

/// Builds the 1.5x / 1.0x / 0.5x inputs. The 1.0x image is the input itself.
MultiScaleImage make_multiscale(const Image& img);

/// Window for output cell i is [floor(i*H/out), ceil((i+1)*H/out)).
FeatureMap adaptive_max_pool(const FeatureMap& fm, std::size_t out_h, std::size_t out_w);

FeatureMap bilinear_upsample(const FeatureMap& fm, std::size_t out_h, std::size_t out_w);

/// Resizes a backbone map to the target grid: pooling when larger, interpolation when smaller.
FeatureMap adapt_feature_map(const FeatureMap& fm, std::size_t out_h, std::size_t out_w);

inline constexpr std::size_t kToyGrid = 16;

/// Per-cell mean followed by per-cell standard deviation over a 16x16 grid (512 values).
Vec cell_statistics(const Image& img);

/// Stand-in image encoder for one scale: cell statistics projected to `dim` and L2-normalised.
Vec toy_encode_image(const Image& img, std::size_t dim);

struct ImageFeatures {
    Vec f_05;
    Vec f_10;
    Vec f_15;
};

ImageFeatures toy_encode(const MultiScaleImage& msi, std::size_t dim);

/// Hashed bag of character trigrams, L2-normalised.
Vec toy_encode_text(std::string_view prompt, std::size_t dim);

/// PGM (P2/P5) and PPM (P3/P6) with maxval up to 65535.
Image read_pnm(const std::filesystem::path& path);
Image decode_pnm(const std::string& bytes);
/// Binary P5/P6 with maxval 255 or 65535.
void write_pnm(const Image& img, const std::filesystem::path& path, unsigned maxval = 255);

/// Encodes every image named in a CSV manifest with columns file, prompt and the
/// optional generator, q_v, q_a, q_c (empty cells mean unlabelled). Sample ids are
/// the file names; paths are relative to `image_dir`.
Dataset encode_manifest(const std::filesystem::path& image_dir, const std::filesystem::path& manifest,
                        std::size_t dim);

}  // namespace amff
