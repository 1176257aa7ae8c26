#pragma once

// Pairwise fidelity loss under the Thurstone Case V model, mean squared error,
// and their unweighted sum.

#include <cstddef>
#include <vector>

#include "amff/tensor.hpp"

namespace amff {

struct BatchScores {
    Vec preds;
    Vec gts;
};

/// P[i][j] = 1 iff gt_i >= gt_j (ties give 1 in both orientations).
Mat preference_matrix(std::span<const double> gts);

/// Phi((s_i - s_j) / sqrt(2)).
double thurstone_prob(double s_i, double s_j);

struct LossResult {
    double loss = 0.0;
    Vec dpreds;
};

/// (1/N^2) * sum over ordered pairs i != j of 1 - sqrt(P Phat) - sqrt((1-P)(1-Phat)).
/// The diagonal terms are constant with zero gradient and are left out of the sum.
LossResult fidelity_loss(const BatchScores& batch);

/// (1/N) * sum (gt - pred)^2.
LossResult mse_loss(const BatchScores& batch);

struct TaskMask {
    bool consistency = true;
    bool quality = true;
    bool authenticity = true;
};

struct LossBundle {
    double l_c = 0.0;
    double l_v = 0.0;
    double l_a = 0.0;
    double total = 0.0;
    Vec d_consistency;
    Vec d_quality;
    Vec d_authenticity;
};

/// Fidelity on consistency, MSE on quality and authenticity; masked tasks add
/// nothing and get empty gradients. Each task may carry its own batch size.
LossBundle total_loss(const BatchScores& consistency, const BatchScores& quality, const BatchScores& authenticity,
                      const TaskMask& mask);

}  // namespace amff
