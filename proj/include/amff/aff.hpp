#pragma once

// Adaptive feature fusion: the three scale features are stacked, pushed row by
// row through Linear(D->h), ReLU, Linear(h->D) with weights shared across rows,
// normalised with a softmax over the scale axis per channel, and used as convex
// mixing weights for the scale features.

#include <array>
#include <cstddef>
#include <vector>

#include "amff/tensor.hpp"

namespace amff {

inline constexpr std::size_t kScaleCount = 3;
/// Row order of the stacked tensor.
enum ScaleRow : std::size_t { kRow05 = 0, kRow10 = 1, kRow15 = 2 };

struct AffParams {
    Mat w1;  // h x D
    Vec b1;  // h
    Mat w2;  // D x h
    Vec b2;  // D

    std::size_t dim() const { return w1.cols; }
    std::size_t hidden() const { return w1.rows; }

    /// Glorot-uniform weights, zero biases.
    static AffParams init(std::size_t dim, std::size_t hidden, Rng& rng);
    static AffParams zeros(std::size_t dim, std::size_t hidden);

    void validate() const;
    std::vector<ParamBlock> blocks();
    std::vector<ConstParamBlock> blocks() const;
};

struct AffCache {
    Mat stacked;  // 3 x D, rows f_05, f_10, f_15
    Mat pre;      // 3 x h, before ReLU
    Mat hidden;   // 3 x h
    Mat logits;   // 3 x D
    Mat weights;  // 3 x D, per-channel simplex
};

struct AffOutput {
    Vec fused;
    AffCache cache;
};

AffOutput aff_forward(std::span<const double> f_05, std::span<const double> f_10,
                      std::span<const double> f_15, const AffParams& p);

struct AffGrads {
    AffParams params;
    Vec df_05;
    Vec df_10;
    Vec df_15;
};

/// Gradients of a downstream scalar given dL/dF_I. Parameter gradients are
/// accumulated into `out.params` (which must be shaped like `p`); input gradients
/// are overwritten.
void aff_backward(const AffCache& cache, const AffParams& p, std::span<const double> d_fused, AffGrads& out);
AffGrads aff_backward(const AffCache& cache, const AffParams& p, std::span<const double> d_fused);

}  // namespace amff
