#pragma once

// Plain-text tables, JSON-lines records and scatter data files.

#include <filesystem>
#include <string>
#include <vector>

#include "amff/experiment.hpp"
#include "amff/gradcheck.hpp"
#include "amff/metrics.hpp"
#include "amff/trainer.hpp"

namespace amff {

/// Aligned table with one row per task.
std::string format_metrics_table(const EvalResult& result);

/// One JSON object per task: {task, srcc, plcc, krcc, n, logistic}.
std::string format_metrics_jsonl(const EvalResult& result);

/// One "pred gt mapped_pred" line per sample.
std::string format_scatter(const TaskPredictions& predictions, const LogisticParams& mapping);

/// Variants as rows, per-task SRCC/PLCC and the mean SRCC as columns.
std::string format_ablation_table(const std::string& title, const std::vector<AblationRow>& rows);
std::string format_ablation_jsonl(const std::string& group, const std::vector<AblationRow>& rows);

std::string format_gradcheck(const std::vector<GradcheckEntry>& entries, double tolerance);

/// One line per sample: id, s_c, s_v, s_a.
std::string format_predictions_csv(const Dataset& dataset, const std::vector<ScoreTriple>& scores);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace amff
