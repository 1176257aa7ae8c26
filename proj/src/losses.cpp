#include "amff/losses.hpp"

#include <cmath>

#include "amff/error.hpp"

namespace amff {

namespace {

void check_batch(const BatchScores& b, std::size_t min_n, const char* what) {
    require(b.preds.size() == b.gts.size(), ErrorCode::Shape, std::string(what) + ": preds and gts differ in length");
    require(b.preds.size() >= min_n, ErrorCode::Value,
            std::string(what) + ": needs at least " + std::to_string(min_n) + " samples");
    require(all_finite(b.preds) && all_finite(b.gts), ErrorCode::Numeric, std::string(what) + ": non-finite input");
}

// dPhat/d(s_i - s_j) for Phat = Phi((s_i - s_j)/sqrt(2)).
double thurstone_density(double diff) { return std::exp(-0.25 * diff * diff) / (2.0 * std::sqrt(M_PI)); }

}  // namespace

Mat preference_matrix(std::span<const double> gts) {
    const std::size_t n = gts.size();
    Mat p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p(i, j) = gts[i] >= gts[j] ? 1.0 : 0.0;
    }
    return p;
}

double thurstone_prob(double s_i, double s_j) { return 0.5 * std::erfc(-(s_i - s_j) / 2.0); }

LossResult fidelity_loss(const BatchScores& batch) {
    check_batch(batch, 2, "fidelity_loss");
    const std::size_t n = batch.preds.size();
    const double norm = 1.0 / static_cast<double>(n * n);
    LossResult out;
    out.dpreds.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double diff = batch.preds[i] - batch.preds[j];
            const double density = thurstone_density(diff);
            double term = 0.0;
            double d_term = 0.0;  // d term / d diff
            if (batch.gts[i] >= batch.gts[j]) {
                const double p_hat = 0.5 * std::erfc(-diff / 2.0);
                const double root = std::sqrt(p_hat);
                term = 1.0 - root;
                d_term = root > 0.0 ? -density / (2.0 * root) : 0.0;
            } else {
                // 1 - Phat evaluated directly keeps precision in the upper tail.
                const double q_hat = 0.5 * std::erfc(diff / 2.0);
                const double root = std::sqrt(q_hat);
                term = 1.0 - root;
                d_term = root > 0.0 ? density / (2.0 * root) : 0.0;
            }
            out.loss += term;
            out.dpreds[i] += norm * d_term;
            out.dpreds[j] -= norm * d_term;
        }
    }
    out.loss *= norm;
    return out;
}

LossResult mse_loss(const BatchScores& batch) {
    check_batch(batch, 1, "mse_loss");
    const std::size_t n = batch.preds.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossResult out;
    out.dpreds.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double r = batch.preds[k] - batch.gts[k];
        out.loss += r * r;
        out.dpreds[k] = 2.0 * r * inv_n;
    }
    out.loss *= inv_n;
    return out;
}

LossBundle total_loss(const BatchScores& consistency, const BatchScores& quality, const BatchScores& authenticity,
                      const TaskMask& mask) {
    require(mask.consistency || mask.quality || mask.authenticity, ErrorCode::Value,
            "total_loss: every component is masked");
    LossBundle out;
    if (mask.consistency) {
        auto r = fidelity_loss(consistency);
        out.l_c = r.loss;
        out.d_consistency = std::move(r.dpreds);
    }
    if (mask.quality) {
        auto r = mse_loss(quality);
        out.l_v = r.loss;
        out.d_quality = std::move(r.dpreds);
    }
    if (mask.authenticity) {
        auto r = mse_loss(authenticity);
        out.l_a = r.loss;
        out.d_authenticity = std::move(r.dpreds);
    }
    out.total = out.l_c + out.l_v + out.l_a;
    return out;
}

}  // namespace amff
