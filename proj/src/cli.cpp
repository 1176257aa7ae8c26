#include "amff/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "amff/checkpoint.hpp"
#include "amff/dataio.hpp"
#include "amff/encoder.hpp"
#include "amff/error.hpp"
#include "amff/experiment.hpp"
#include "amff/gradcheck.hpp"
#include "amff/parallel.hpp"
#include "amff/report.hpp"
#include "amff/trainer.hpp"

namespace amff::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Training options shared by train and ablate. Only flags that were given
/// override the config file, which overrides the defaults.
struct TrainFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;
    std::size_t epochs = 0;
    double lr = 0.0;
    std::size_t lr_drop_epoch = 0;
    std::size_t patience = 0;
    std::string similarity;
    bool no_msi = false;
    bool no_aff = false;
    std::string split = "random:0.8";
    std::size_t trials = 1;

    CLI::Option* o_seed = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_drop = nullptr;
    CLI::Option* o_patience = nullptr;
    CLI::Option* o_similarity = nullptr;

    void add_to(CLI::App& app) {
        app.add_option("--config", config_path, "JSON training config");
        o_seed = app.add_option("--seed", seed, "base seed (default 0)");
        o_batch = app.add_option("--batch-size", batch_size, "mini-batch size");
        o_epochs = app.add_option("--epochs", epochs, "maximum epochs");
        o_lr = app.add_option("--lr", lr, "learning rate before the drop");
        o_drop = app.add_option("--lr-drop-epoch", lr_drop_epoch, "first epoch at one tenth of the learning rate");
        o_patience = app.add_option("--patience", patience, "early-stopping patience in epochs");
        o_similarity = app.add_option("--similarity", similarity, "cosine, euclidean or manhattan")
                           ->check(CLI::IsMember({"cosine", "euclidean", "manhattan"}));
        app.add_flag("--no-msi", no_msi, "feed the 1.0x feature to every fusion input");
        app.add_flag("--no-aff", no_aff, "fuse scales by direct addition");
        app.add_option("--split", split, "random:FRACTION or per-generator:FRACTION")->capture_default_str();
        app.add_option("--trials", trials, "repeat with seeds seed..seed+N-1 and report medians")
            ->capture_default_str();
    }

    TrainConfig resolve(const TrainConfig& base) const {
        TrainConfig cfg = config_path.empty() ? base : TrainConfig::from_json(read_text_file(config_path));
        if (o_seed->count()) cfg.seed = seed;
        if (o_batch->count()) cfg.batch_size = batch_size;
        if (o_epochs->count()) cfg.max_epochs = epochs;
        if (o_lr->count()) cfg.lr = lr;
        if (o_drop->count()) cfg.lr_drop_epoch = lr_drop_epoch;
        if (o_patience->count()) cfg.patience = patience;
        if (o_similarity->count()) cfg.similarity = parse_similarity(similarity);
        if (no_msi) cfg.fusion.use_msi = false;
        if (no_aff) cfg.fusion.use_aff = false;
        cfg.validate();
        return cfg;
    }
};

void write_eval_outputs(const fs::path& out_dir, const std::string& stem, const EvalResult& result,
                        const std::vector<TaskPredictions>& predictions) {
    write_text_file(out_dir / "reports" / (stem + ".txt"), format_metrics_table(result));
    write_text_file(out_dir / "reports" / (stem + ".jsonl"), format_metrics_jsonl(result));
    for (const auto& tp : predictions) {
        const TaskMetrics* m = result.find(tp.task);
        require(m != nullptr, ErrorCode::Value, "missing metrics for task " + tp.task);
        write_text_file(out_dir / "scatter" / (stem + "_" + tp.task + ".txt"), format_scatter(tp, m->logistic));
    }
}

TrainedModel load_model(const fs::path& path) {
    const Checkpoint ck = load_checkpoint(path);
    return model_from_state(ck.state, ck.config);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-scale fusion quality assessment toolkit", "amff"};
    app.require_subcommand(1);

    // synth
    std::size_t synth_n = 512;
    std::size_t synth_dim = 64;
    double synth_noise = 0.01;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a planted synthetic feature-record file");
    synth->add_option("--n", synth_n, "sample count")->capture_default_str();
    synth->add_option("--dim", synth_dim, "feature dimension")->capture_default_str();
    synth->add_option("--noise", synth_noise, "feature noise sigma")->capture_default_str();
    synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output file (.csv for text, binary otherwise)")->required();

    // extract
    std::string images_dir, manifest_path, extract_out;
    std::size_t extract_dim = 64;
    auto* extract = app.add_subcommand("extract", "encode PGM/PPM images listed in a manifest with the toy encoder");
    extract->add_option("--images", images_dir, "image directory")->required();
    extract->add_option("--manifest", manifest_path, "CSV manifest: file,prompt[,generator,q_v,q_a,q_c]")->required();
    extract->add_option("--dim", extract_dim, "feature dimension")->capture_default_str();
    extract->add_option("--out", extract_out, "output feature file")->required();

    // train
    TrainFlags train_flags;
    std::string train_data, train_out, train_resume;
    auto* train_cmd = app.add_subcommand("train", "train on a split, save checkpoints and held-out reports");
    train_cmd->add_option("--data", train_data, "feature file")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--checkpoint", train_resume, "resume from this checkpoint");
    train_flags.add_to(*train_cmd);

    // eval
    std::string eval_data, eval_out, eval_ckpt, eval_split;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--data", eval_data, "feature file")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--out", eval_out, "output directory")->required();
    eval_cmd->add_option("--split", eval_split, "evaluate the test part of this split (checkpoint seed)");

    // predict
    std::string pred_data, pred_out, pred_ckpt;
    auto* pred_cmd = app.add_subcommand("predict", "score every sample with a checkpoint");
    pred_cmd->add_option("--data", pred_data, "feature file")->required();
    pred_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
    pred_cmd->add_option("--out", pred_out, "output directory (stdout when omitted)");

    // ablate
    TrainFlags ablate_flags;
    std::string ablate_data, ablate_out;
    auto* ablate_cmd = app.add_subcommand("ablate", "paired fusion and similarity ablations");
    ablate_cmd->add_option("--data", ablate_data, "feature file")->required();
    ablate_cmd->add_option("--out", ablate_out, "output directory")->required();
    ablate_flags.add_to(*ablate_cmd);

    // gradcheck
    std::uint64_t gc_seed = 0;
    std::string gc_out;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
    gc_cmd->add_option("--seed", gc_seed, "seed")->capture_default_str();
    gc_cmd->add_option("--out", gc_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << error_code_name(ErrorCode::Value) << ": " << e.what() << "\n";
        return 2;
    }

    try {
        if (synth->parsed()) {
            Rng rng(synth_seed);
            const Dataset ds = synth_generate(synth_n, synth_dim, synth_noise, rng);
            save_dataset(ds, synth_out);
            out << fmt::format("wrote {} samples of dimension {} to {}\n", ds.size(), ds.dim(), synth_out);
        } else if (extract->parsed()) {
            const Dataset ds = encode_manifest(images_dir, manifest_path, extract_dim);
            save_dataset(ds, extract_out);
            out << fmt::format("encoded {} images to {}\n", ds.size(), extract_out);
        } else if (train_cmd->parsed()) {
            const Dataset ds = load_dataset(train_data);
            std::optional<Checkpoint> resume;
            TrainConfig base;
            if (!train_resume.empty()) {
                resume = load_checkpoint(train_resume);
                base = resume->config;
            }
            const TrainConfig cfg = train_flags.resolve(base);
            const SplitSpec split = SplitSpec::parse(train_flags.split);
            const ExperimentResult res =
                run_experiment(ds, cfg, split, train_flags.trials, resume ? &resume->state : nullptr);
            const fs::path dir = train_out;
            write_text_file(dir / "reports" / "config.json", cfg.to_json() + "\n");
            for (const auto& trial : res.trials) {
                TrainConfig trial_cfg = cfg;
                trial_cfg.seed = trial.seed;
                const std::string tag = fmt::format("seed{}", trial.seed);
                save_checkpoint(dir / "checkpoints" / (tag + ".ckpt"), trial_cfg, trial.train.state);
                write_text_file(dir / "reports" / ("train_" + tag + ".json"), trial.train.report.to_json() + "\n");
                write_eval_outputs(dir, "test_" + tag, trial.test, trial.predictions);
            }
            const auto& first = res.trials.front();
            TrainConfig first_cfg = cfg;
            first_cfg.seed = first.seed;
            save_checkpoint(dir / "checkpoints" / "model.ckpt", first_cfg, first.train.state);
            write_text_file(dir / "reports" / "train_report.json", first.train.report.to_json() + "\n");
            write_text_file(dir / "reports" / "test_metrics.txt", format_metrics_table(res.median));
            write_text_file(dir / "reports" / "test_metrics.jsonl", format_metrics_jsonl(res.median));
            out << fmt::format("held-out metrics ({} trial{}, split {})\n", res.trials.size(),
                               res.trials.size() == 1 ? "" : "s", split.to_string())
                << format_metrics_table(res.median);
        } else if (eval_cmd->parsed()) {
            const Checkpoint ck = load_checkpoint(eval_ckpt);
            const TrainedModel model = model_from_state(ck.state, ck.config);
            Dataset ds = load_dataset(eval_data);
            if (!eval_split.empty()) ds = make_split(ds, SplitSpec::parse(eval_split), ck.config.seed).second;
            const auto predictions = collect_predictions(model, ds);
            const EvalResult result = evaluate(predictions);
            write_eval_outputs(eval_out, "eval", result, predictions);
            out << format_metrics_table(result);
        } else if (pred_cmd->parsed()) {
            const TrainedModel model = load_model(pred_ckpt);
            const Dataset ds = load_dataset(pred_data);
            require(ds.dim() == model.params.dim(), ErrorCode::Shape,
                    "model was trained on feature dimension " + std::to_string(model.params.dim()) +
                        ", data has " + std::to_string(ds.dim()));
            std::vector<ScoreTriple> scores(ds.size());
            parallel_for(ds.size(), default_thread_count(),
                         [&](std::size_t i) { scores[i] = predict(model, ds.samples[i].features); });
            const std::string csv = format_predictions_csv(ds, scores);
            if (pred_out.empty()) {
                out << csv;
            } else {
                write_text_file(fs::path(pred_out) / "reports" / "predictions.csv", csv);
                out << fmt::format("scored {} samples\n", ds.size());
            }
        } else if (ablate_cmd->parsed()) {
            const Dataset ds = load_dataset(ablate_data);
            const TrainConfig cfg = ablate_flags.resolve(TrainConfig{});
            const AblationResult res = run_ablation(ds, cfg, SplitSpec::parse(ablate_flags.split), ablate_flags.trials);
            const std::string table = format_ablation_table("Fusion ablation", res.fusion) + "\n" +
                                      format_ablation_table("Similarity metric", res.similarity);
            const fs::path dir = ablate_out;
            write_text_file(dir / "reports" / "ablation.txt", table);
            write_text_file(dir / "reports" / "ablation.jsonl",
                            format_ablation_jsonl("fusion", res.fusion) +
                                format_ablation_jsonl("similarity", res.similarity));
            out << table;
        } else if (gc_cmd->parsed()) {
            const auto entries = run_gradcheck(gc_seed);
            const std::string table = format_gradcheck(entries, kGradTolerance);
            if (!gc_out.empty()) write_text_file(fs::path(gc_out) / "reports" / "gradcheck.txt", table);
            out << table;
            for (const auto& e : entries) {
                require(e.max_rel_error < kGradTolerance, ErrorCode::Numeric,
                        fmt::format("gradient check failed for {} ({:.3e})", e.name, e.max_rel_error));
            }
        }
    } catch (const Error& e) {
        err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << error_code_name(ErrorCode::Io) << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace amff::cli
