#pragma once

// Split, train and held-out evaluation, repeated over seeded trials, plus the
// paired ablation harness.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amff/dataio.hpp"
#include "amff/metrics.hpp"
#include "amff/trainer.hpp"

namespace amff {

enum class SplitKind { Random, PerGenerator };

struct SplitSpec {
    SplitKind kind = SplitKind::Random;
    double train_fraction = 0.8;

    /// "random:0.8" or "per-generator:0.75"; a bare kind keeps its default fraction.
    static SplitSpec parse(const std::string& text);
    std::string to_string() const;
};

/// Train/test split drawn from a stream of `seed` that training never touches.
Split make_split(const Dataset& dataset, const SplitSpec& spec, std::uint64_t seed);

struct TrialResult {
    std::uint64_t seed = 0;
    TrainResult train;
    std::vector<TaskPredictions> predictions;  // on the test part
    EvalResult test;
};

struct ExperimentResult {
    std::vector<TrialResult> trials;
    EvalResult median;
};

/// Trial t uses seed cfg.seed + t for both its split and its training run.
/// `resume` continues a saved run and needs a single trial.
ExperimentResult run_experiment(const Dataset& dataset, const TrainConfig& cfg, const SplitSpec& split,
                                std::size_t trials, const TrainState* resume = nullptr);

struct AblationRow {
    std::string name;
    EvalResult result;
};

struct AblationResult {
    std::vector<AblationRow> fusion;      // full, w/o MSI, w/o AFF
    std::vector<AblationRow> similarity;  // cosine, euclidean, manhattan
};

/// Every variant sees the same splits and seeds, so rows are paired.
AblationResult run_ablation(const Dataset& dataset, const TrainConfig& base, const SplitSpec& split,
                            std::size_t trials);

}  // namespace amff
