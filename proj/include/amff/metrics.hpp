#pragma once

// SRCC / KRCC / PLCC evaluation with the four-parameter logistic pre-mapping.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "amff/dataio.hpp"
#include "amff/tensor.hpp"

namespace amff {

/// Plain Pearson correlation. Throws E_NUMERIC when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the average rank.
Vec fractional_ranks(std::span<const double> v);

double srcc(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b (tie corrected), O(n log n).
double krcc(std::span<const double> x, std::span<const double> y);

/// s~ = (k1 - k2) / (1 + exp(k4 (s - k3))) + k2. When `identity` is set the
/// mapping returns s unchanged (used when a fit fails).
struct LogisticParams {
    double k1 = 1.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double k4 = -1.0;
    bool identity = false;

    double operator()(double s) const;
};

struct LogisticFit {
    LogisticParams params;
    std::vector<double> cost_trace;  // initial cost, then every accepted step
    std::size_t iterations = 0;
    bool converged = false;
    bool fallback = false;
};

/// Levenberg-Marquardt least squares with the analytic Jacobian.
LogisticFit logistic_fit_detailed(std::span<const double> preds, std::span<const double> gts);
LogisticParams logistic_fit(std::span<const double> preds, std::span<const double> gts);

struct PlccResult {
    double plcc = 0.0;
    LogisticParams params;
};

/// Pearson correlation between the logistic-mapped predictions and gts.
PlccResult plcc(std::span<const double> preds, std::span<const double> gts);

struct TaskMetrics {
    std::string task;
    double srcc = 0.0;
    double plcc = 0.0;
    double krcc = 0.0;
    std::size_t n = 0;
    LogisticParams logistic;
};

struct EvalResult {
    std::vector<TaskMetrics> tasks;

    const TaskMetrics* find(const std::string& task) const;
    double mean_srcc() const;
};

TaskMetrics evaluate_task(const std::string& task, std::span<const double> preds, std::span<const double> gts);

/// Per-metric median across trials; tasks are matched by name and must agree.
EvalResult median_of_trials(const std::vector<EvalResult>& results);

double median(std::vector<double> values);

}  // namespace amff
