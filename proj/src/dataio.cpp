#include "amff/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "amff/error.hpp"
#include "byte_io.hpp"

namespace amff {

using detail::ByteReader;
using detail::ByteWriter;

const char* task_name(Task task) noexcept {
    switch (task) {
        case Task::Quality: return "quality";
        case Task::Authenticity: return "authenticity";
        case Task::Consistency: return "consistency";
    }
    return "unknown";
}

void FeatureBundle::validate() const {
    const std::size_t d = f_10.size();
    require(d > 0, ErrorCode::Shape, "feature bundle has zero dimension");
    require(f_text.size() == d && f_05.size() == d && f_15.size() == d, ErrorCode::Shape,
            "feature bundle vectors differ in dimension");
    require(all_finite(f_text) && all_finite(f_05) && all_finite(f_10) && all_finite(f_15),
            ErrorCode::Numeric, "feature bundle contains non-finite values");
}

std::optional<double> Labels::get(Task task) const {
    switch (task) {
        case Task::Quality: return q_v;
        case Task::Authenticity: return q_a;
        case Task::Consistency: return q_c;
    }
    return std::nullopt;
}

void Dataset::validate() const {
    require(!samples.empty(), ErrorCode::Value, "dataset is empty");
    const std::size_t d = dim();
    std::set<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        s.features.validate();
        require(s.features.dim() == d, ErrorCode::Shape,
                "sample " + std::to_string(i) + " has dimension " + std::to_string(s.features.dim()) +
                    ", expected " + std::to_string(d));
        require(ids.insert(s.id).second, ErrorCode::Value, "duplicate sample id '" + s.id + "'");
        for (Task t : kAllTasks) {
            const auto v = s.labels.get(t);
            require(!v || std::isfinite(*v), ErrorCode::Numeric,
                    "sample " + std::to_string(i) + " has a non-finite label");
        }
    }
}

std::optional<LabelRange> Dataset::label_range(Task task) const {
    std::optional<LabelRange> range;
    for (const Sample& s : samples) {
        const auto v = s.labels.get(task);
        if (!v) continue;
        if (!range) {
            range = LabelRange{*v, *v};
        } else {
            range->min = std::min(range->min, *v);
            range->max = std::max(range->max, *v);
        }
    }
    return range;
}

bool Dataset::has_task(Task task) const {
    return std::any_of(samples.begin(), samples.end(),
                       [task](const Sample& s) { return s.labels.get(task).has_value(); });
}

Dataset quantize_to_f32(Dataset dataset) {
    auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (Sample& s : dataset.samples) {
        for (Vec* v : {&s.features.f_text, &s.features.f_05, &s.features.f_10, &s.features.f_15}) {
            for (double& x : *v) x = q(x);
        }
        for (std::optional<double>* l : {&s.labels.q_v, &s.labels.q_a, &s.labels.q_c}) {
            if (*l) **l = q(**l);
        }
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// Binary codec

namespace {

constexpr char kMagic[4] = {'A', 'M', 'F', 'F'};

}  // namespace

std::vector<std::uint8_t> encode_feature_records(const Dataset& dataset) {
    dataset.validate();
    const std::size_t d = dataset.dim();
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kRecordVersion);
    w.u32(static_cast<std::uint32_t>(d));
    w.u64(dataset.samples.size());
    for (const Sample& s : dataset.samples) {
        require(s.id.size() <= 0xffff && s.generator_id.size() <= 0xffff, ErrorCode::Value,
                "id or generator id longer than 65535 bytes");
        w.u16(static_cast<std::uint16_t>(s.id.size()));
        w.bytes(s.id);
        w.u16(static_cast<std::uint16_t>(s.generator_id.size()));
        w.bytes(s.generator_id);
        w.u32(static_cast<std::uint32_t>(s.prompt.size()));
        w.bytes(s.prompt);
        std::uint8_t mask = 0;
        for (Task t : kAllTasks) {
            if (s.labels.get(t)) mask |= static_cast<std::uint8_t>(1u << static_cast<int>(t));
        }
        w.u8(mask);
        for (Task t : kAllTasks) {
            if (const auto v = s.labels.get(t)) w.f32(*v);
        }
        for (const Vec* v : {&s.features.f_text, &s.features.f_05, &s.features.f_10, &s.features.f_15}) {
            for (double x : *v) w.f32(x);
        }
    }
    return w.take();
}

Dataset decode_feature_records(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    const std::string magic = r.str(4);
    require(magic == std::string(kMagic, 4), ErrorCode::Format, "bad magic, not a feature-record file");
    const std::uint32_t version = r.u32();
    require(version == kRecordVersion, ErrorCode::Format,
            "unsupported record version " + std::to_string(version));
    const std::uint32_t d = r.u32();
    require(d > 0, ErrorCode::Format, "header: feature dimension is zero");
    const std::uint64_t n = r.u64();
    require(n > 0, ErrorCode::Format, "header: zero records");

    Dataset ds;
    // Each record needs at least 4*D floats; reject absurd counts before reserving.
    require(n <= r.remaining() / (16ull * d), ErrorCode::Format, "header: record count exceeds file size");
    ds.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        r.set_record(i);
        Sample s;
        s.id = r.str(r.u16());
        s.generator_id = r.str(r.u16());
        s.prompt = r.str(r.u32());
        const std::uint8_t mask = r.u8();
        require((mask & ~0x7u) == 0, ErrorCode::Format, r.where() + ": unknown label mask bits");
        if (mask & 0x1) s.labels.q_v = r.f32();
        if (mask & 0x2) s.labels.q_a = r.f32();
        if (mask & 0x4) s.labels.q_c = r.f32();
        for (Vec* v : {&s.features.f_text, &s.features.f_05, &s.features.f_10, &s.features.f_15}) {
            v->resize(d);
            for (double& x : *v) x = r.f32();
        }
        ds.samples.push_back(std::move(s));
    }
    require(r.remaining() == 0, ErrorCode::Format, "trailing bytes after last record");
    ds.validate();
    return ds;
}

void write_feature_records(const Dataset& dataset, const std::filesystem::path& path) {
    const auto bytes = encode_feature_records(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Dataset read_feature_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_feature_records(bytes);
}

// ---------------------------------------------------------------------------
// CSV codec

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

namespace {

double parse_double(const std::string& s, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(!s.empty() && end == s.c_str() + s.size(), ErrorCode::Format,
            "record " + std::to_string(row) + ": cannot parse number '" + s + "'");
    require(std::isfinite(v), ErrorCode::Format, "record " + std::to_string(row) + ": non-finite value");
    return v;
}

}  // namespace

void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    const std::size_t d = dataset.dim();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << "id,generator,prompt,q_v,q_a,q_c";
    for (const char* prefix : {"ftext_", "f05_", "f10_", "f15_"}) {
        for (std::size_t k = 0; k < d; ++k) out << ',' << prefix << k;
    }
    out << '\n';
    for (const Sample& s : dataset.samples) {
        out << csv_quote(s.id) << ',' << csv_quote(s.generator_id) << ',' << csv_quote(s.prompt);
        for (Task t : kAllTasks) {
            out << ',';
            if (const auto v = s.labels.get(t)) out << format_double(*v);
        }
        for (const Vec* v : {&s.features.f_text, &s.features.f_05, &s.features.f_10, &s.features.f_15}) {
            for (double x : *v) out << ',' << format_double(x);
        }
        out << '\n';
    }
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Dataset read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::string> fields;
    require(read_csv_row(in, fields), ErrorCode::Format, "empty CSV file");
    require(fields.size() > 6 && (fields.size() - 6) % 4 == 0, ErrorCode::Format, "malformed CSV header");
    static const char* kFixed[] = {"id", "generator", "prompt", "q_v", "q_a", "q_c"};
    for (int k = 0; k < 6; ++k) {
        require(fields[k] == kFixed[k], ErrorCode::Format, "CSV header column " + std::to_string(k) +
                                                              " should be '" + kFixed[k] + "'");
    }
    const std::size_t d = (fields.size() - 6) / 4;
    require(fields[6] == "ftext_0", ErrorCode::Format, "CSV header: expected ftext_0 after q_c");
    const std::size_t width = fields.size();

    Dataset ds;
    std::size_t row = 0;
    while (read_csv_row(in, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        require(fields.size() == width, ErrorCode::Format,
                "record " + std::to_string(row) + ": expected " + std::to_string(width) + " columns, got " +
                    std::to_string(fields.size()));
        Sample s;
        s.id = fields[0];
        s.generator_id = fields[1];
        s.prompt = fields[2];
        if (!fields[3].empty()) s.labels.q_v = parse_double(fields[3], row);
        if (!fields[4].empty()) s.labels.q_a = parse_double(fields[4], row);
        if (!fields[5].empty()) s.labels.q_c = parse_double(fields[5], row);
        std::size_t col = 6;
        for (Vec* v : {&s.features.f_text, &s.features.f_05, &s.features.f_10, &s.features.f_15}) {
            v->resize(d);
            for (double& x : *v) x = parse_double(fields[col++], row);
        }
        ds.samples.push_back(std::move(s));
        ++row;
    }
    ds.validate();
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_feature_csv(path);
    return read_feature_records(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (path.extension() == ".csv") {
        write_feature_csv(dataset, path);
    } else {
        write_feature_records(dataset, path);
    }
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

// Returns (train indices, test indices), each ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::vector<std::size_t> idx,
                                                                            double train_fraction, Rng& rng,
                                                                            const std::string& what) {
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::Value,
            "train fraction must lie strictly between 0 and 1");
    const std::size_t n = idx.size();
    require(n >= 2, ErrorCode::Value, what + " has fewer than 2 samples");
    const std::size_t n_train = round_half_up(train_fraction * static_cast<double>(n));
    require(n_train > 0 && n_train < n, ErrorCode::Value,
            what + ": fraction " + std::to_string(train_fraction) + " of " + std::to_string(n) +
                " samples leaves an empty side");
    rng.shuffle(idx);
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

Dataset gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.samples.reserve(idx.size());
    for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
    return out;
}

}  // namespace

Split split_random(const Dataset& dataset, double train_fraction, Rng& rng) {
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [train, test] = split_indices(std::move(idx), train_fraction, rng, "dataset");
    return {gather(dataset, train), gather(dataset, test)};
}

Split split_per_generator(const Dataset& dataset, double train_fraction, Rng& rng) {
    // Groups in order of first appearance so the rng consumption order is stable.
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::string& g = dataset.samples[i].generator_id;
        require(!g.empty(), ErrorCode::Value, "sample " + std::to_string(i) + " has no generator id");
        auto [it, inserted] = groups.try_emplace(g);
        if (inserted) order.push_back(g);
        it->second.push_back(i);
    }
    std::vector<std::size_t> train, test;
    for (const std::string& g : order) {
        auto [tr, te] = split_indices(groups[g], train_fraction, rng, "generator group '" + g + "'");
        train.insert(train.end(), tr.begin(), tr.end());
        test.insert(test.end(), te.begin(), te.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {gather(dataset, train), gather(dataset, test)};
}

// ---------------------------------------------------------------------------
// Planted generator

namespace {

Vec smooth_channels(const Vec& v) {
    const std::size_t d = v.size();
    Vec out(d);
    for (std::size_t c = 0; c < d; ++c) {
        out[c] = 0.25 * v[(c + d - 1) % d] + 0.5 * v[c] + 0.25 * v[(c + 1) % d];
    }
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Dataset synth_generate(std::size_t n, std::size_t dim, double noise_sigma, Rng& rng, SynthTruth* truth) {
    require(n >= 4, ErrorCode::Value, "synth_generate: need at least 4 samples");
    require(dim >= 8, ErrorCode::Value, "synth_generate: need dimension >= 8");
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::Value,
            "synth_generate: noise sigma must be finite and non-negative");

    constexpr std::size_t kz = kSynthLatentDim;
    constexpr std::size_t kGenerators = 4;
    Mat mixing(dim, kz);
    for (double& a : mixing.data) a = rng.normal() / std::sqrt(static_cast<double>(kz));
    const Vec w_v = random_normal(rng, kz, 0.6);
    const Vec w_a = random_normal(rng, kz, 0.6);
    const Vec zero_bias(dim, 0.0);

    if (truth) {
        truth->latents.clear();
        truth->w_v = w_v;
        truth->w_a = w_a;
    }

    Dataset ds;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec z = random_normal(rng, kz);
        Vec f10 = affine_forward(mixing, zero_bias, z);
        for (double& x : f10) x += noise_sigma * rng.normal();

        const Vec smooth = smooth_channels(f10);
        Vec f05 = smooth;
        Vec f15(dim);
        for (std::size_t c = 0; c < dim; ++c) {
            f05[c] += noise_sigma * rng.normal();
            f15[c] = f10[c] + 0.5 * (f10[c] - smooth[c]) + noise_sigma * rng.normal();
        }

        // f_text = cos(t) u + sin(t) w with u = f10 / |f10| and w a unit vector orthogonal to u.
        const double cos_t = rng.uniform(0.05, 0.95);
        const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
        const double f10_norm = norm2(f10);
        require(f10_norm > 0.0, ErrorCode::Numeric, "synth_generate: degenerate feature");
        Vec u = f10;
        for (double& x : u) x /= f10_norm;
        Vec w = random_normal(rng, dim);
        const double proj = dot(w, u);
        for (std::size_t c = 0; c < dim; ++c) w[c] -= proj * u[c];
        const double w_norm = norm2(w);
        for (double& x : w) x /= w_norm;
        Vec ftext(dim);
        for (std::size_t c = 0; c < dim; ++c) ftext[c] = cos_t * u[c] + sin_t * w[c];

        Sample s;
        char id[32];
        std::snprintf(id, sizeof id, "s%06zu", i);
        s.id = id;
        s.generator_id = "gen" + std::to_string(i % kGenerators);
        s.prompt = "synthetic prompt " + std::to_string(i);
        s.features = FeatureBundle{std::move(ftext), std::move(f05), std::move(f10), std::move(f15)};
        s.labels.q_v = 1.0 + 4.0 * sigmoid(dot(w_v, z));
        s.labels.q_a = 1.0 + 4.0 * sigmoid(dot(w_a, z));
        s.labels.q_c = cos_t;
        ds.samples.push_back(std::move(s));
        if (truth) truth->latents.push_back(z);
    }
    return ds;
}

}  // namespace amff
