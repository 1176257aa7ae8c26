#pragma once

// Dataset model, feature-record codecs, split procedures and the planted
// synthetic generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amff/tensor.hpp"

namespace amff {

/// The three rating dimensions. Order matches the label mask bits of the record format.
enum class Task { Quality = 0, Authenticity = 1, Consistency = 2 };

inline constexpr std::array<Task, 3> kAllTasks{Task::Quality, Task::Authenticity, Task::Consistency};

const char* task_name(Task task) noexcept;

/// Text feature plus the image features at 0.5x, 1.0x and 1.5x input scale.
struct FeatureBundle {
    Vec f_text;
    Vec f_05;
    Vec f_10;
    Vec f_15;

    std::size_t dim() const { return f_10.size(); }
    /// Throws E_SHAPE / E_NUMERIC when the bundle is inconsistent.
    void validate() const;

    bool operator==(const FeatureBundle&) const = default;
};

struct Labels {
    std::optional<double> q_v;
    std::optional<double> q_a;
    std::optional<double> q_c;

    std::optional<double> get(Task task) const;
    bool any() const { return q_v || q_a || q_c; }

    bool operator==(const Labels&) const = default;
};

struct Sample {
    std::string id;
    std::string prompt;
    std::string generator_id;
    FeatureBundle features;
    Labels labels;

    bool operator==(const Sample&) const = default;
};

struct LabelRange {
    double min = 0.0;
    double max = 0.0;
};

struct Dataset {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().features.dim(); }
    /// Non-empty, unique ids, consistent dims, finite values.
    void validate() const;
    /// Range of a label over the samples that carry it; nullopt when no sample does.
    std::optional<LabelRange> label_range(Task task) const;
    bool has_task(Task task) const;

    bool operator==(const Dataset&) const = default;
};

/// Round every stored value through float32, matching what the record codec keeps.
Dataset quantize_to_f32(Dataset dataset);

// Binary feature-record file: "AMFF" | u32 version | u32 D | u64 n | records.
inline constexpr std::uint32_t kRecordVersion = 1;

std::vector<std::uint8_t> encode_feature_records(const Dataset& dataset);
Dataset decode_feature_records(const std::vector<std::uint8_t>& bytes);

void write_feature_records(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_feature_records(const std::filesystem::path& path);

/// RFC 4180 quoting, applied only when the field needs it.
std::string csv_quote(const std::string& field);
/// Reads one logical CSV row; quoted fields may span lines. False at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields);

void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_feature_csv(const std::filesystem::path& path);

/// Dispatches on extension: ".csv" uses the CSV layout, anything else the binary one.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

using Split = std::pair<Dataset, Dataset>;

/// Train size is round-half-up(train_fraction * n); both sides must be non-empty.
Split split_random(const Dataset& dataset, double train_fraction, Rng& rng);

/// Applies split_random independently inside every generator group.
Split split_per_generator(const Dataset& dataset, double train_fraction, Rng& rng);

/// Ground truth kept by the planted generator for recoverability checks.
struct SynthTruth {
    std::vector<Vec> latents;  // z per sample
    Vec w_v;
    Vec w_a;
};

inline constexpr std::size_t kSynthLatentDim = 8;

/// Planted dataset. Latent z ~ N(0, I_8); f_10 = A z + noise; f_05 and f_15 are a
/// smoothed and a sharpened copy of f_10 with their own noise; quality and
/// authenticity are 1 + 4 sigmoid(w . z); f_text sits at a drawn angle to f_10 and
/// q_c stores the cosine of that angle.
Dataset synth_generate(std::size_t n, std::size_t dim, double noise_sigma, Rng& rng,
                       SynthTruth* truth = nullptr);

}  // namespace amff
