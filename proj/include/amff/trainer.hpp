#pragma once

// AdamW training loop with label normalisation, held-out monitoring, the
// learning-rate drop and early stopping.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amff/dataio.hpp"
#include "amff/losses.hpp"
#include "amff/metrics.hpp"
#include "amff/scoring.hpp"

namespace amff {

/// Which ground truth orders the fidelity-loss pairs.
enum class ComparisonLabel { Consistency, Quality };

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 120;
    double lr = 5e-4;
    std::size_t lr_drop_epoch = 80;      // 1-based epoch from which lr_after_drop applies
    std::optional<double> lr_after_drop;  // default lr / 10
    double weight_decay = 1e-2;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    Similarity similarity = Similarity::Cosine;
    FusionOptions fusion;
    std::size_t aff_hidden = kDefaultHidden;
    std::size_t mlp_hidden = kDefaultHidden;
    double validation_fraction = 0.1;
    ComparisonLabel comparison = ComparisonLabel::Consistency;
    std::size_t threads = 0;  // 0: default_thread_count()

    void validate() const;
    double lr_at(std::size_t epoch) const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

/// Maps raw quality/authenticity labels to [0, 1] and back.
struct LabelScaler {
    std::optional<LabelRange> quality;
    std::optional<LabelRange> authenticity;

    static LabelScaler fit(const Dataset& dataset);
    double normalize(Task task, double raw) const;
    double denormalize(Task task, double value) const;
};

struct AdamState {
    std::vector<Vec> m;
    std::vector<Vec> v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState like(const ModelParams& params);
};

/// Decoupled weight decay followed by a bias-corrected Adam update.
void adamw_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double weight_decay);

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss_c = 0.0;
    double loss_v = 0.0;
    double loss_a = 0.0;
    double loss_total = 0.0;
    std::map<std::string, double> val_srcc;
    double val_mean = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::string stop_reason;
    std::string params_checksum;

    std::string to_json() const;
};

struct TrainedModel {
    ModelParams params;
    LabelScaler scaler;
    FusionOptions fusion;
};

/// Everything needed to continue a run bit-identically.
struct TrainState {
    ModelParams current;
    ModelParams best;
    AdamState optimizer;
    Rng shuffle_rng;
    LabelScaler scaler;
    std::size_t epoch = 0;
    double best_score = 0.0;
    std::size_t best_epoch = 0;
    std::size_t since_improve = 0;
    bool finished = false;  // early stopping fired
    std::string stop_reason;
    std::vector<EpochRecord> history;
};

struct TrainResult {
    TrainedModel model;
    TrainReport report;
    TrainState state;
};

/// Trains on `dataset`, holding out validation_fraction of it for monitoring.
/// Returns the parameters of the best validation epoch.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainState* resume = nullptr);

TrainedModel model_from_state(const TrainState& state, const TrainConfig& cfg);

/// FNV-1a over the little-endian bytes of every parameter, as 16 hex digits.
std::string params_checksum(const ModelParams& params);

/// Model forward under ablation flags (w/o MSI, w/o AFF).
ScoreTriple ablation_variant_forward(const FeatureBundle& features, const ModelParams& params,
                                     const FusionOptions& flags);

/// Scores in label units (quality/authenticity denormalised).
ScoreTriple predict(const TrainedModel& model, const FeatureBundle& features);

struct TaskPredictions {
    std::string task;
    Vec preds;
    Vec gts;
};

/// Predictions and ground truths for every task labelled in `dataset`.
std::vector<TaskPredictions> collect_predictions(const TrainedModel& model, const Dataset& dataset,
                                                 std::size_t threads = 0);

EvalResult evaluate(const std::vector<TaskPredictions>& predictions);
EvalResult evaluate_model(const TrainedModel& model, const Dataset& dataset, std::size_t threads = 0);

}  // namespace amff
