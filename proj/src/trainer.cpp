#include "amff/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "amff/error.hpp"
#include "amff/parallel.hpp"

namespace amff {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
    require(batch_size >= 1, ErrorCode::Value, "batch size must be positive");
    require(max_epochs >= 1, ErrorCode::Value, "max epochs must be positive");
    require(std::isfinite(lr) && lr >= 0.0, ErrorCode::Value, "learning rate must be finite and non-negative");
    require(!lr_after_drop || (std::isfinite(*lr_after_drop) && *lr_after_drop >= 0.0), ErrorCode::Value,
            "post-drop learning rate must be finite and non-negative");
    require(std::isfinite(weight_decay) && weight_decay >= 0.0, ErrorCode::Value, "weight decay must be non-negative");
    require(patience >= 1, ErrorCode::Value, "patience must be at least 1");
    require(aff_hidden >= 1 && mlp_hidden >= 1, ErrorCode::Value, "hidden widths must be positive");
    require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorCode::Value,
            "validation fraction must lie strictly between 0 and 1");
}

double TrainConfig::lr_at(std::size_t epoch) const {
    if (epoch >= lr_drop_epoch) return lr_after_drop.value_or(lr / 10.0);
    return lr;
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["lr"] = lr;
    j["lr_drop_epoch"] = lr_drop_epoch;
    j["lr_after_drop"] = lr_after_drop ? ordered_json(*lr_after_drop) : ordered_json(nullptr);
    j["weight_decay"] = weight_decay;
    j["patience"] = patience;
    j["seed"] = seed;
    j["similarity"] = similarity_name(similarity);
    j["use_msi"] = fusion.use_msi;
    j["use_aff"] = fusion.use_aff;
    j["plain_sum"] = fusion.plain_sum;
    j["aff_hidden"] = aff_hidden;
    j["mlp_hidden"] = mlp_hidden;
    j["validation_fraction"] = validation_fraction;
    j["comparison"] = comparison == ComparisonLabel::Consistency ? "consistency" : "quality";
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorCode::Format, std::string("config JSON: ") + e.what());
    }
    require(j.is_object(), ErrorCode::Format, "config JSON must be an object");
    TrainConfig c;
    try {
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.lr = j.value("lr", c.lr);
        c.lr_drop_epoch = j.value("lr_drop_epoch", c.lr_drop_epoch);
        if (j.contains("lr_after_drop") && !j["lr_after_drop"].is_null()) {
            c.lr_after_drop = j["lr_after_drop"].get<double>();
        }
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.patience = j.value("patience", c.patience);
        c.seed = j.value("seed", c.seed);
        if (j.contains("similarity")) c.similarity = parse_similarity(j["similarity"].get<std::string>());
        c.fusion.use_msi = j.value("use_msi", c.fusion.use_msi);
        c.fusion.use_aff = j.value("use_aff", c.fusion.use_aff);
        c.fusion.plain_sum = j.value("plain_sum", c.fusion.plain_sum);
        c.aff_hidden = j.value("aff_hidden", c.aff_hidden);
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
        if (j.contains("comparison")) {
            const auto s = j["comparison"].get<std::string>();
            require(s == "consistency" || s == "quality", ErrorCode::Value, "comparison must be consistency or quality");
            c.comparison = s == "consistency" ? ComparisonLabel::Consistency : ComparisonLabel::Quality;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("config JSON: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Label scaling

LabelScaler LabelScaler::fit(const Dataset& dataset) {
    return LabelScaler{dataset.label_range(Task::Quality), dataset.label_range(Task::Authenticity)};
}

namespace {

const std::optional<LabelRange>& range_for(const LabelScaler& s, Task task) {
    static const std::optional<LabelRange> none;
    if (task == Task::Quality) return s.quality;
    if (task == Task::Authenticity) return s.authenticity;
    return none;
}

}  // namespace

double LabelScaler::normalize(Task task, double raw) const {
    const auto& r = range_for(*this, task);
    if (!r) return raw;
    const double span = r->max - r->min;
    return span > 0.0 ? (raw - r->min) / span : raw - r->min;
}

double LabelScaler::denormalize(Task task, double value) const {
    const auto& r = range_for(*this, task);
    if (!r) return value;
    const double span = r->max - r->min;
    return span > 0.0 ? value * span + r->min : value + r->min;
}

// ---------------------------------------------------------------------------
// AdamW

AdamState AdamState::like(const ModelParams& params) {
    AdamState s;
    for (const auto& b : params.blocks()) {
        s.m.emplace_back(b.values.size(), 0.0);
        s.v.emplace_back(b.values.size(), 0.0);
    }
    return s;
}

void adamw_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double weight_decay) {
    require(std::isfinite(lr) && lr >= 0.0, ErrorCode::Value, "adamw_step: learning rate must be non-negative");
    auto pb = params.blocks();
    const auto gb = grads.blocks();
    require(pb.size() == gb.size() && pb.size() == state.m.size() && pb.size() == state.v.size(), ErrorCode::Shape,
            "adamw_step: parameter, gradient and state layouts differ");
    for (std::size_t b = 0; b < pb.size(); ++b) {
        require(pb[b].values.size() == gb[b].values.size() && pb[b].values.size() == state.m[b].size() &&
                    pb[b].values.size() == state.v[b].size(),
                ErrorCode::Shape, "adamw_step: shape mismatch in block " + pb[b].name);
        require(all_finite(gb[b].values), ErrorCode::Numeric, "adamw_step: non-finite gradient in block " + gb[b].name);
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t b = 0; b < pb.size(); ++b) {
        auto p = pb[b].values;
        const auto g = gb[b].values;
        Vec& m = state.m[b];
        Vec& v = state.v[b];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            p[k] *= decay;
            p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

std::string TrainReport::to_json() const {
    ordered_json j;
    j["best_epoch"] = best_epoch;
    j["stop_reason"] = stop_reason;
    j["params_checksum"] = params_checksum;
    ordered_json epochs_json = ordered_json::array();
    for (const EpochRecord& e : epochs) {
        ordered_json r;
        r["epoch"] = e.epoch;
        r["lr"] = e.lr;
        r["loss_c"] = e.loss_c;
        r["loss_v"] = e.loss_v;
        r["loss_a"] = e.loss_a;
        r["loss_total"] = e.loss_total;
        ordered_json v = ordered_json::object();
        for (const auto& [task, s] : e.val_srcc) v[task] = s;
        r["val_srcc"] = v;
        r["val_mean"] = e.val_mean;
        epochs_json.push_back(r);
    }
    j["epochs"] = epochs_json;
    return j.dump(2);
}

std::string params_checksum(const ModelParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& b : params.blocks()) {
        for (double x : b.values) {
            const auto bits = std::bit_cast<std::uint64_t>(x);
            for (int k = 0; k < 8; ++k) {
                h ^= (bits >> (8 * k)) & 0xffu;
                h *= 0x100000001b3ULL;
            }
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Inference helpers

ScoreTriple ablation_variant_forward(const FeatureBundle& features, const ModelParams& params,
                                     const FusionOptions& flags) {
    return model_forward(features, params, flags).scores;
}

ScoreTriple predict(const TrainedModel& model, const FeatureBundle& features) {
    ScoreTriple s = model_forward(features, model.params, model.fusion).scores;
    s.s_v = model.scaler.denormalize(Task::Quality, s.s_v);
    s.s_a = model.scaler.denormalize(Task::Authenticity, s.s_a);
    return s;
}

namespace {

double task_score(const ScoreTriple& s, Task task) {
    switch (task) {
        case Task::Quality: return s.s_v;
        case Task::Authenticity: return s.s_a;
        case Task::Consistency: return s.s_c;
    }
    return 0.0;
}

std::vector<ScoreTriple> forward_all(const TrainedModel& model, const Dataset& dataset, std::size_t threads) {
    std::vector<ScoreTriple> out(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) { out[i] = predict(model, dataset.samples[i].features); });
    return out;
}

std::vector<TaskPredictions> gather_predictions(const Dataset& dataset, const std::vector<ScoreTriple>& scores) {
    std::vector<TaskPredictions> out;
    for (Task task : kAllTasks) {
        TaskPredictions tp;
        tp.task = task_name(task);
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (const auto gt = dataset.samples[i].labels.get(task)) {
                tp.preds.push_back(task_score(scores[i], task));
                tp.gts.push_back(*gt);
            }
        }
        if (!tp.preds.empty()) out.push_back(std::move(tp));
    }
    return out;
}

}  // namespace

std::vector<TaskPredictions> collect_predictions(const TrainedModel& model, const Dataset& dataset,
                                                 std::size_t threads) {
    require(dataset.dim() == model.params.dim(), ErrorCode::Shape,
            "model was trained on feature dimension " + std::to_string(model.params.dim()) + ", data has " +
                std::to_string(dataset.dim()));
    if (threads == 0) threads = default_thread_count();
    return gather_predictions(dataset, forward_all(model, dataset, threads));
}

EvalResult evaluate(const std::vector<TaskPredictions>& predictions) {
    EvalResult r;
    for (const auto& tp : predictions) r.tasks.push_back(evaluate_task(tp.task, tp.preds, tp.gts));
    require(!r.tasks.empty(), ErrorCode::Value, "evaluation set carries no labels");
    return r;
}

EvalResult evaluate_model(const TrainedModel& model, const Dataset& dataset, std::size_t threads) {
    return evaluate(collect_predictions(model, dataset, threads));
}

TrainedModel model_from_state(const TrainState& state, const TrainConfig& cfg) {
    return TrainedModel{state.best, state.scaler, cfg.fusion};
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

constexpr std::size_t kGradGroup = 4;

void add_into(ModelParams& dst, const ModelParams& src) {
    auto d = dst.blocks();
    const auto s = src.blocks();
    for (std::size_t b = 0; b < d.size(); ++b) axpy(1.0, s[b].values, d[b].values);
}

void zero(ModelParams& p) {
    for (auto& b : p.blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
}

std::optional<double> comparison_label(const Labels& l, ComparisonLabel which) {
    return which == ComparisonLabel::Consistency ? l.q_c : l.q_v;
}

// SRCC that reports 0 for a constant prediction vector instead of failing.
double monitor_srcc(const Vec& preds, const Vec& gts) {
    if (preds.size() < 2) return 0.0;
    const auto [lo, hi] = std::minmax_element(preds.begin(), preds.end());
    const auto [glo, ghi] = std::minmax_element(gts.begin(), gts.end());
    if (*lo == *hi || *glo == *ghi) return 0.0;
    return srcc(preds, gts);
}

struct BatchLosses {
    double c = 0.0, v = 0.0, a = 0.0, total = 0.0;
};

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainState* resume) {
    cfg.validate();
    dataset.validate();
    const std::size_t threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;

    const Rng base(cfg.seed);
    Rng split_rng = base.derive(1);
    auto [fit, val] = split_random(dataset, 1.0 - cfg.validation_fraction, split_rng);

    const bool has_c = std::any_of(fit.samples.begin(), fit.samples.end(), [&](const Sample& s) {
        return comparison_label(s.labels, cfg.comparison).has_value();
    });
    const bool has_v = fit.has_task(Task::Quality);
    const bool has_a = fit.has_task(Task::Authenticity);
    require(has_c || has_v || has_a, ErrorCode::Value, "training data carries no usable labels");

    TrainState state;
    if (resume) {
        state = *resume;
        require(state.current.dim() == dataset.dim(), ErrorCode::Shape,
                "checkpoint dimension " + std::to_string(state.current.dim()) + " differs from data dimension " +
                    std::to_string(dataset.dim()));
    } else {
        Rng init_rng = base.derive(2);
        state.current = ModelParams::init(dataset.dim(), init_rng, cfg.aff_hidden, cfg.mlp_hidden, cfg.similarity);
        state.best = state.current;
        state.optimizer = AdamState::like(state.current);
        state.shuffle_rng = base.derive(3);
        state.scaler = LabelScaler::fit(fit);
        state.best_score = std::numeric_limits<double>::lowest();
    }
    const LabelScaler& scaler = state.scaler;

    std::vector<ModelParams> group_grads;
    ModelParams grads = ModelParams::zeros_like(state.current);

    while (!state.finished && state.epoch < cfg.max_epochs) {
        const std::size_t epoch = state.epoch + 1;
        const double lr = cfg.lr_at(epoch);
        std::vector<std::size_t> order(fit.size());
        std::iota(order.begin(), order.end(), 0);
        state.shuffle_rng.shuffle(order);

        BatchLosses sum;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            std::vector<ModelOutput> outs(n);
            parallel_for(n, threads, [&](std::size_t i) {
                outs[i] = model_forward(fit.samples[order[start + i]].features, state.current, cfg.fusion);
            });

            BatchScores bc, bv, ba;
            std::vector<std::size_t> ic, iv, ia;
            for (std::size_t i = 0; i < n; ++i) {
                const Labels& l = fit.samples[order[start + i]].labels;
                if (const auto g = comparison_label(l, cfg.comparison)) {
                    bc.preds.push_back(outs[i].scores.s_c);
                    bc.gts.push_back(*g);
                    ic.push_back(i);
                }
                if (l.q_v) {
                    bv.preds.push_back(outs[i].scores.s_v);
                    bv.gts.push_back(scaler.normalize(Task::Quality, *l.q_v));
                    iv.push_back(i);
                }
                if (l.q_a) {
                    ba.preds.push_back(outs[i].scores.s_a);
                    ba.gts.push_back(scaler.normalize(Task::Authenticity, *l.q_a));
                    ia.push_back(i);
                }
            }
            const TaskMask mask{bc.preds.size() >= 2, !bv.preds.empty(), !ba.preds.empty()};
            if (!mask.consistency && !mask.quality && !mask.authenticity) continue;
            const LossBundle loss = total_loss(bc, bv, ba, mask);
            require(std::isfinite(loss.total), ErrorCode::Numeric,
                    "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));

            std::vector<ScoreTriple> d_scores(n);
            for (std::size_t k = 0; k < loss.d_consistency.size(); ++k) d_scores[ic[k]].s_c = loss.d_consistency[k];
            for (std::size_t k = 0; k < loss.d_quality.size(); ++k) d_scores[iv[k]].s_v = loss.d_quality[k];
            for (std::size_t k = 0; k < loss.d_authenticity.size(); ++k) d_scores[ia[k]].s_a = loss.d_authenticity[k];

            // Fixed-size sample groups keep the reduction order independent of the thread count.
            const std::size_t groups = (n + kGradGroup - 1) / kGradGroup;
            while (group_grads.size() < groups) group_grads.push_back(ModelParams::zeros_like(state.current));
            parallel_for(groups, threads, [&](std::size_t g) {
                zero(group_grads[g]);
                for (std::size_t i = g * kGradGroup; i < std::min(n, (g + 1) * kGradGroup); ++i) {
                    model_backward(outs[i].cache, state.current, d_scores[i], group_grads[g]);
                }
            });
            zero(grads);
            for (std::size_t g = 0; g < groups; ++g) add_into(grads, group_grads[g]);

            try {
                adamw_step(state.current, grads, state.optimizer, lr, cfg.weight_decay);
            } catch (const Error& e) {
                fail(e.code(), std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batches) + ")");
            }
            sum.c += loss.l_c;
            sum.v += loss.l_v;
            sum.a += loss.l_a;
            sum.total += loss.total;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        if (batches > 0) {
            const double inv = 1.0 / static_cast<double>(batches);
            rec.loss_c = sum.c * inv;
            rec.loss_v = sum.v * inv;
            rec.loss_a = sum.a * inv;
            rec.loss_total = sum.total * inv;
        }

        // Held-out monitoring in normalised units; rank metrics are unaffected.
        std::vector<ScoreTriple> val_scores(val.size());
        parallel_for(val.size(), threads, [&](std::size_t i) {
            val_scores[i] = model_forward(val.samples[i].features, state.current, cfg.fusion).scores;
        });
        double total = 0.0;
        std::size_t count = 0;
        for (Task task : kAllTasks) {
            Vec p, g;
            for (std::size_t i = 0; i < val.size(); ++i) {
                const Labels& l = val.samples[i].labels;
                const auto gt = task == Task::Consistency ? l.q_c : l.get(task);
                if (!gt) continue;
                p.push_back(task_score(val_scores[i], task));
                g.push_back(*gt);
            }
            if (p.size() < 2) continue;
            const double s = monitor_srcc(p, g);
            rec.val_srcc[task_name(task)] = s;
            total += s;
            ++count;
        }
        require(count > 0, ErrorCode::Value, "validation split carries no labels");
        rec.val_mean = total / static_cast<double>(count);
        require(std::isfinite(rec.val_mean), ErrorCode::Numeric, "non-finite validation score at epoch " +
                                                                      std::to_string(epoch));

        state.epoch = epoch;
        state.history.push_back(rec);
        if (rec.val_mean > state.best_score) {
            state.best_score = rec.val_mean;
            state.best_epoch = epoch;
            state.best = state.current;
            state.since_improve = 0;
        } else if (++state.since_improve >= cfg.patience) {
            state.finished = true;
            state.stop_reason = "early_stop";
        }
    }
    // Only early stopping is final; a run cut at max_epochs may be resumed with a larger budget.
    if (!state.finished) state.stop_reason = "max_epochs";

    TrainResult result;
    result.model = model_from_state(state, cfg);
    result.report.epochs = state.history;
    result.report.best_epoch = state.best_epoch;
    result.report.stop_reason = state.stop_reason;
    result.report.params_checksum = params_checksum(state.best);
    result.state = std::move(state);
    return result;
}

}  // namespace amff
