#include "amff/report.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "amff/error.hpp"

namespace amff {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json logistic_json(const LogisticParams& p) {
    if (p.identity) return "identity";
    return ordered_json::array({p.k1, p.k2, p.k3, p.k4});
}

}  // namespace

std::string format_metrics_table(const EvalResult& result) {
    std::string out = fmt::format("{:<14}{:>9}{:>9}{:>9}{:>7}\n", "task", "SRCC", "PLCC", "KRCC", "n");
    for (const auto& t : result.tasks) {
        out += fmt::format("{:<14}{:>9.4f}{:>9.4f}{:>9.4f}{:>7}\n", t.task, t.srcc, t.plcc, t.krcc, t.n);
    }
    out += fmt::format("{:<14}{:>9.4f}\n", "mean", result.mean_srcc());
    return out;
}

std::string format_metrics_jsonl(const EvalResult& result) {
    std::string out;
    for (const auto& t : result.tasks) {
        ordered_json j;
        j["task"] = t.task;
        j["srcc"] = t.srcc;
        j["plcc"] = t.plcc;
        j["krcc"] = t.krcc;
        j["n"] = t.n;
        j["logistic"] = logistic_json(t.logistic);
        out += j.dump() + "\n";
    }
    return out;
}

std::string format_scatter(const TaskPredictions& predictions, const LogisticParams& mapping) {
    std::string out = "# pred gt mapped_pred\n";
    for (std::size_t i = 0; i < predictions.preds.size(); ++i) {
        const double p = predictions.preds[i];
        out += fmt::format("{:.9g} {:.9g} {:.9g}\n", p, predictions.gts[i], mapping(p));
    }
    return out;
}

std::string format_ablation_table(const std::string& title, const std::vector<AblationRow>& rows) {
    require(!rows.empty(), ErrorCode::Value, "ablation table needs at least one row");
    std::vector<std::string> columns;
    for (const auto& t : rows.front().result.tasks) {
        columns.push_back(t.task + " SRCC");
        columns.push_back(t.task + " PLCC");
    }
    columns.push_back("mean SRCC");
    std::string out = title + "\n" + fmt::format("{:<12}", "variant");
    for (const auto& c : columns) out += fmt::format("{:>{}}", c, c.size() + 2);
    out += "\n";
    for (const auto& row : rows) {
        std::vector<double> values;
        for (const auto& t : rows.front().result.tasks) {
            const TaskMetrics* m = row.result.find(t.task);
            require(m != nullptr, ErrorCode::Value, "ablation rows disagree on tasks");
            values.push_back(m->srcc);
            values.push_back(m->plcc);
        }
        values.push_back(row.result.mean_srcc());
        out += fmt::format("{:<12}", row.name);
        for (std::size_t k = 0; k < values.size(); ++k) out += fmt::format("{:>{}.4f}", values[k], columns[k].size() + 2);
        out += "\n";
    }
    return out;
}

std::string format_ablation_jsonl(const std::string& group, const std::vector<AblationRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (const auto& t : row.result.tasks) {
            ordered_json j;
            j["group"] = group;
            j["variant"] = row.name;
            j["task"] = t.task;
            j["srcc"] = t.srcc;
            j["plcc"] = t.plcc;
            j["krcc"] = t.krcc;
            j["n"] = t.n;
            out += j.dump() + "\n";
        }
    }
    return out;
}

std::string format_gradcheck(const std::vector<GradcheckEntry>& entries, double tolerance) {
    std::string out = fmt::format("{:<28}{:>14}{:>6}\n", "block", "max rel err", "ok");
    for (const auto& e : entries) {
        out += fmt::format("{:<28}{:>14.3e}{:>6}\n", e.name, e.max_rel_error, e.max_rel_error < tolerance ? "yes" : "NO");
    }
    return out;
}

std::string format_predictions_csv(const Dataset& dataset, const std::vector<ScoreTriple>& scores) {
    require(dataset.size() == scores.size(), ErrorCode::Shape, "prediction count differs from sample count");
    std::string out = "id,s_c,s_v,s_a\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", dataset.samples[i].id, scores[i].s_c, scores[i].s_v,
                           scores[i].s_a);
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << text;
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace amff
