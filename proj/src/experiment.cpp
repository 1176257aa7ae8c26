#include "amff/experiment.hpp"

#include <charconv>

#include <fmt/format.h>

#include "amff/error.hpp"

namespace amff {

namespace {

constexpr std::uint64_t kSplitStream = 7;

double parse_fraction(const std::string& text) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    require(res.ec == std::errc() && res.ptr == end, ErrorCode::Value, "bad split fraction '" + text + "'");
    require(value > 0.0 && value < 1.0, ErrorCode::Value, "split fraction must lie strictly between 0 and 1");
    return value;
}

}  // namespace

SplitSpec SplitSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    SplitSpec spec;
    if (kind == "random") {
        spec = {SplitKind::Random, 0.8};
    } else if (kind == "per-generator") {
        spec = {SplitKind::PerGenerator, 0.75};
    } else {
        fail(ErrorCode::Value, "unknown split kind '" + kind + "' (expected random or per-generator)");
    }
    if (colon != std::string::npos) spec.train_fraction = parse_fraction(text.substr(colon + 1));
    return spec;
}

std::string SplitSpec::to_string() const {
    return fmt::format("{}:{:g}", kind == SplitKind::Random ? "random" : "per-generator", train_fraction);
}

Split make_split(const Dataset& dataset, const SplitSpec& spec, std::uint64_t seed) {
    Rng rng = Rng(seed).derive(kSplitStream);
    return spec.kind == SplitKind::Random ? split_random(dataset, spec.train_fraction, rng)
                                          : split_per_generator(dataset, spec.train_fraction, rng);
}

ExperimentResult run_experiment(const Dataset& dataset, const TrainConfig& cfg, const SplitSpec& split,
                                std::size_t trials, const TrainState* resume) {
    require(trials >= 1, ErrorCode::Value, "trial count must be at least 1");
    require(!resume || trials == 1, ErrorCode::Value, "resuming supports a single trial only");
    ExperimentResult out;
    std::vector<EvalResult> evals;
    for (std::size_t t = 0; t < trials; ++t) {
        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = cfg.seed + t;
        const auto [train_part, test_part] = make_split(dataset, split, trial_cfg.seed);
        TrialResult r;
        r.seed = trial_cfg.seed;
        r.train = train(train_part, trial_cfg, resume);
        r.predictions = collect_predictions(r.train.model, test_part, cfg.threads);
        r.test = evaluate(r.predictions);
        evals.push_back(r.test);
        out.trials.push_back(std::move(r));
    }
    out.median = median_of_trials(evals);
    return out;
}

AblationResult run_ablation(const Dataset& dataset, const TrainConfig& base, const SplitSpec& split,
                            std::size_t trials) {
    auto run = [&](TrainConfig cfg) { return run_experiment(dataset, cfg, split, trials).median; };

    TrainConfig full = base;
    full.fusion = FusionOptions{};
    full.similarity = Similarity::Cosine;
    const EvalResult full_result = run(full);

    AblationResult out;
    out.fusion.push_back({"full", full_result});
    TrainConfig no_msi = full;
    no_msi.fusion.use_msi = false;
    out.fusion.push_back({"w/o MSI", run(no_msi)});
    TrainConfig no_aff = full;
    no_aff.fusion.use_aff = false;
    no_aff.fusion.plain_sum = base.fusion.plain_sum;
    out.fusion.push_back({"w/o AFF", run(no_aff)});

    out.similarity.push_back({"cosine", full_result});
    for (Similarity kind : {Similarity::Euclidean, Similarity::Manhattan}) {
        TrainConfig cfg = full;
        cfg.similarity = kind;
        out.similarity.push_back({similarity_name(kind), run(cfg)});
    }
    return out;
}

}  // namespace amff
