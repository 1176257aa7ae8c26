#include "amff/encoder.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>

#include "amff/error.hpp"

namespace amff {

void Image::validate() const {
    require(channels == 1 || channels == 3, ErrorCode::Value, "image must have 1 or 3 channels");
    require(height > 0 && width > 0, ErrorCode::Value, "image has zero size");
    require(pixels.size() == height * width * channels, ErrorCode::Shape, "image pixel count mismatch");
}

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

struct Tap {
    std::size_t i0;
    std::size_t i1;
    double w;  // weight of i1
};

// Half-pixel-centred sampling positions (align_corners = false), clamped at borders.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[o] = Tap{i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

double lerp2(double v00, double v01, double v10, double v11, double wy, double wx) {
    const double top = (1.0 - wx) * v00 + wx * v01;
    const double bottom = (1.0 - wx) * v10 + wx * v11;
    return (1.0 - wy) * top + wy * bottom;
}

}  // namespace

Image rescale_bilinear(const Image& img, double factor) {
    img.validate();
    require(factor > 0.0 && std::isfinite(factor), ErrorCode::Value, "rescale factor must be positive");
    const std::size_t oh = round_half_up(factor * static_cast<double>(img.height));
    const std::size_t ow = round_half_up(factor * static_cast<double>(img.width));
    require(oh >= 1 && ow >= 1, ErrorCode::Value, "rescale produces an empty image");
    const auto ty = bilinear_taps(img.height, oh);
    const auto tx = bilinear_taps(img.width, ow);
    Image out(oh, ow, img.channels);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            for (std::size_t c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = lerp2(img.at(ty[y].i0, tx[x].i0, c), img.at(ty[y].i0, tx[x].i1, c),
                                        img.at(ty[y].i1, tx[x].i0, c), img.at(ty[y].i1, tx[x].i1, c),
                                        ty[y].w, tx[x].w);
            }
        }
    }
    return out;
}

MultiScaleImage make_multiscale(const Image& img) {
    return MultiScaleImage{rescale_bilinear(img, 1.5), img, rescale_bilinear(img, 0.5)};
}

FeatureMap adaptive_max_pool(const FeatureMap& fm, std::size_t out_h, std::size_t out_w) {
    require(fm.channels > 0 && fm.height > 0 && fm.width > 0, ErrorCode::Value, "empty feature map");
    require(out_h >= 1 && out_w >= 1 && out_h <= fm.height && out_w <= fm.width, ErrorCode::Value,
            "adaptive_max_pool: target must be non-empty and no larger than the input");
    FeatureMap out(fm.channels, out_h, out_w);
    auto start = [](std::size_t i, std::size_t in, std::size_t o) { return (i * in) / o; };
    auto stop = [](std::size_t i, std::size_t in, std::size_t o) { return ((i + 1) * in + o - 1) / o; };
    for (std::size_t c = 0; c < fm.channels; ++c) {
        for (std::size_t i = 0; i < out_h; ++i) {
            const std::size_t y0 = start(i, fm.height, out_h), y1 = stop(i, fm.height, out_h);
            for (std::size_t j = 0; j < out_w; ++j) {
                const std::size_t x0 = start(j, fm.width, out_w), x1 = stop(j, fm.width, out_w);
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t y = y0; y < y1; ++y) {
                    for (std::size_t x = x0; x < x1; ++x) m = std::max(m, fm.at(c, y, x));
                }
                out.at(c, i, j) = m;
            }
        }
    }
    return out;
}

FeatureMap bilinear_upsample(const FeatureMap& fm, std::size_t out_h, std::size_t out_w) {
    require(fm.channels > 0 && fm.height > 0 && fm.width > 0, ErrorCode::Value, "empty feature map");
    require(out_h >= fm.height && out_w >= fm.width, ErrorCode::Value,
            "bilinear_upsample: target must be at least the input size");
    const auto ty = bilinear_taps(fm.height, out_h);
    const auto tx = bilinear_taps(fm.width, out_w);
    FeatureMap out(fm.channels, out_h, out_w);
    for (std::size_t c = 0; c < fm.channels; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                out.at(c, y, x) = lerp2(fm.at(c, ty[y].i0, tx[x].i0), fm.at(c, ty[y].i0, tx[x].i1),
                                        fm.at(c, ty[y].i1, tx[x].i0), fm.at(c, ty[y].i1, tx[x].i1), ty[y].w,
                                        tx[x].w);
            }
        }
    }
    return out;
}

FeatureMap adapt_feature_map(const FeatureMap& fm, std::size_t out_h, std::size_t out_w) {
    if (fm.height >= out_h && fm.width >= out_w) return adaptive_max_pool(fm, out_h, out_w);
    require(fm.height <= out_h && fm.width <= out_w, ErrorCode::Value,
            "adapt_feature_map: mixed down/up-sampling is not supported");
    return bilinear_upsample(fm, out_h, out_w);
}

Vec cell_statistics(const Image& img) {
    img.validate();
    require(img.height >= kToyGrid && img.width >= kToyGrid, ErrorCode::Value,
            "image smaller than the " + std::to_string(kToyGrid) + "x" + std::to_string(kToyGrid) + " grid");
    constexpr std::size_t cells = kToyGrid * kToyGrid;
    Vec stats(2 * cells);
    for (std::size_t gy = 0; gy < kToyGrid; ++gy) {
        const std::size_t y0 = gy * img.height / kToyGrid, y1 = (gy + 1) * img.height / kToyGrid;
        for (std::size_t gx = 0; gx < kToyGrid; ++gx) {
            const std::size_t x0 = gx * img.width / kToyGrid, x1 = (gx + 1) * img.width / kToyGrid;
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t y = y0; y < y1; ++y) {
                for (std::size_t x = x0; x < x1; ++x) {
                    for (std::size_t c = 0; c < img.channels; ++c) sum += img.at(y, x, c);
                }
            }
            count = (y1 - y0) * (x1 - x0) * img.channels;
            const double mean = sum / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
                for (std::size_t x = x0; x < x1; ++x) {
                    for (std::size_t c = 0; c < img.channels; ++c) {
                        const double d = img.at(y, x, c) - mean;
                        sq += d * d;
                    }
                }
            }
            const std::size_t cell = gy * kToyGrid + gx;
            stats[cell] = mean;
            stats[cells + cell] = std::sqrt(sq / static_cast<double>(count));
        }
    }
    return stats;
}

namespace {

constexpr std::uint64_t kProjectionSeed = 0xA3FF0001ULL;

void normalize_in_place(Vec& v) {
    const double n = norm2(v);
    require(n > 0.0, ErrorCode::Numeric, "cannot normalise a zero vector");
    for (double& x : v) x /= n;
}

}  // namespace

Vec toy_encode_image(const Image& img, std::size_t dim) {
    require(dim > 0 && dim % 4 == 0, ErrorCode::Value, "toy encoder dimension must be a positive multiple of 4");
    const Vec stats = cell_statistics(img);
    Rng rng(kProjectionSeed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(stats.size()));
    Vec out(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        double acc = 0.0;
        for (double s : stats) acc += scale * rng.normal() * s;
        out[r] = acc;
    }
    normalize_in_place(out);
    return out;
}

ImageFeatures toy_encode(const MultiScaleImage& msi, std::size_t dim) {
    return ImageFeatures{toy_encode_image(msi.i_05, dim), toy_encode_image(msi.i_10, dim),
                         toy_encode_image(msi.i_15, dim)};
}

Vec toy_encode_text(std::string_view prompt, std::size_t dim) {
    require(!prompt.empty(), ErrorCode::Value, "prompt is empty");
    require(dim > 0, ErrorCode::Value, "text encoder dimension must be positive");
    std::string padded = " ";
    padded.append(prompt);
    padded += ' ';
    Vec out(dim, 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (std::size_t k = 0; k < 3; ++k) {
            h ^= static_cast<unsigned char>(padded[i + k]);
            h *= 0x100000001b3ULL;
        }
        out[h % dim] += 1.0;
    }
    normalize_in_place(out);
    return out;
}

// ---------------------------------------------------------------------------
// PNM

namespace {

class PnmCursor {
public:
    explicit PnmCursor(const std::string& b) : bytes_(b) {}

    std::size_t pos() const { return pos_; }
    void skip(std::size_t n) { pos_ += n; }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    unsigned long number() {
        skip_space_and_comments();
        require(pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_])),
                ErrorCode::Format, "PNM: expected a number");
        unsigned long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            v = v * 10 + static_cast<unsigned long>(bytes_[pos_++] - '0');
            require(v <= 0xffffffffUL, ErrorCode::Format, "PNM: number too large");
        }
        return v;
    }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(const std::string& bytes) {
    require(bytes.size() >= 2 && bytes[0] == 'P', ErrorCode::Format, "PNM: bad magic");
    const char kind = bytes[1];
    require(kind == '2' || kind == '3' || kind == '5' || kind == '6', ErrorCode::Format,
            "PNM: only P2, P3, P5 and P6 are supported");
    PnmCursor cur(bytes);
    cur.skip(2);
    const auto width = cur.number();
    const auto height = cur.number();
    const auto maxval = cur.number();
    require(width > 0 && height > 0, ErrorCode::Format, "PNM: zero size");
    require(maxval > 0 && maxval <= 65535, ErrorCode::Format, "PNM: maxval must be in 1..65535");
    const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
    Image img(height, width, channels);
    const double scale = 1.0 / static_cast<double>(maxval);

    if (kind == '2' || kind == '3') {
        for (double& p : img.pixels) {
            const auto v = cur.number();
            require(v <= maxval, ErrorCode::Format, "PNM: sample exceeds maxval");
            p = static_cast<double>(v) * scale;
        }
        return img;
    }
    // Exactly one whitespace byte separates the header from binary data.
    cur.skip(1);
    const std::size_t bps = maxval < 256 ? 1 : 2;
    require(bytes.size() >= cur.pos() + img.pixels.size() * bps, ErrorCode::Format, "PNM: truncated pixel data");
    std::size_t p = cur.pos();
    for (double& px : img.pixels) {
        unsigned v = static_cast<unsigned char>(bytes[p++]);
        if (bps == 2) v = (v << 8) | static_cast<unsigned char>(bytes[p++]);
        require(v <= maxval, ErrorCode::Format, "PNM: sample exceeds maxval");
        px = static_cast<double>(v) * scale;
    }
    return img;
}

Image read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

void write_pnm(const Image& img, const std::filesystem::path& path, unsigned maxval) {
    img.validate();
    require(maxval == 255 || maxval == 65535, ErrorCode::Value, "write_pnm: maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << '\n' << maxval << '\n';
    for (double px : img.pixels) {
        const auto v = static_cast<unsigned>(std::lround(std::clamp(px, 0.0, 1.0) * maxval));
        if (maxval > 255) out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xff));
    }
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Dataset encode_manifest(const std::filesystem::path& image_dir, const std::filesystem::path& manifest,
                        std::size_t dim) {
    require(dim >= 1, ErrorCode::Value, "feature dimension must be positive");
    std::ifstream in(manifest, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open manifest '" + manifest.string() + "'");
    std::vector<std::string> header;
    require(read_csv_row(in, header), ErrorCode::Format, "empty manifest");
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto file_col = column("file");
    const auto prompt_col = column("prompt");
    require(file_col && prompt_col, ErrorCode::Format, "manifest needs 'file' and 'prompt' columns");
    const auto gen_col = column("generator");
    const std::array<std::optional<std::size_t>, 3> label_cols{column("q_v"), column("q_a"), column("q_c")};

    Dataset ds;
    std::vector<std::string> row;
    std::size_t line = 1;
    while (read_csv_row(in, row)) {
        ++line;
        if (row.size() == 1 && row[0].empty()) continue;
        require(row.size() == header.size(), ErrorCode::Format,
                "manifest row " + std::to_string(line) + ": expected " + std::to_string(header.size()) + " fields");
        Sample s;
        s.id = row[*file_col];
        s.prompt = row[*prompt_col];
        s.generator_id = gen_col ? row[*gen_col] : std::string();
        std::array<std::optional<double>, 3> labels;
        for (std::size_t k = 0; k < 3; ++k) {
            if (!label_cols[k] || row[*label_cols[k]].empty()) continue;
            const std::string& cell = row[*label_cols[k]];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            require(end == cell.c_str() + cell.size() && std::isfinite(v), ErrorCode::Format,
                    "manifest row " + std::to_string(line) + ": bad label '" + cell + "'");
            labels[k] = v;
        }
        s.labels = Labels{labels[0], labels[1], labels[2]};
        const ImageFeatures f = toy_encode(make_multiscale(read_pnm(image_dir / s.id)), dim);
        s.features = FeatureBundle{toy_encode_text(s.prompt, dim), f.f_05, f.f_10, f.f_15};
        ds.samples.push_back(std::move(s));
    }
    require(!ds.samples.empty(), ErrorCode::Value, "manifest lists no images");
    ds.validate();
    return ds;
}

}  // namespace amff
