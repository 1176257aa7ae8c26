#pragma once

// Regression heads, image-text similarity and the full model forward/backward.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "amff/aff.hpp"
#include "amff/dataio.hpp"
#include "amff/tensor.hpp"

namespace amff {

struct MlpParams {
    Mat w1;  // h x D
    Vec b1;  // h
    Mat w2;  // 1 x h
    Vec b2;  // 1

    std::size_t dim() const { return w1.cols; }
    std::size_t hidden() const { return w1.rows; }

    static MlpParams init(std::size_t dim, std::size_t hidden, Rng& rng);
    static MlpParams zeros(std::size_t dim, std::size_t hidden);

    void validate() const;
    std::vector<ParamBlock> blocks(const std::string& prefix);
    std::vector<ConstParamBlock> blocks(const std::string& prefix) const;
};

struct MlpCache {
    Vec x;
    Vec pre;
    Vec hidden;
};

struct MlpOutput {
    double y = 0.0;
    MlpCache cache;
};

/// y = W2 ReLU(W1 x + b1) + b2.
MlpOutput mlp_forward(const MlpParams& p, std::span<const double> x);

/// Accumulates parameter gradients into `grads`; returns dL/dx.
Vec mlp_backward(const MlpCache& cache, const MlpParams& p, double dy, MlpParams& grads);

enum class Similarity { Cosine, Euclidean, Manhattan };

const char* similarity_name(Similarity kind) noexcept;
Similarity parse_similarity(const std::string& name);

struct SimilarityResult {
    double score = 0.0;
    Vec grad_img;  // d score / d f_img
};

/// Cosine similarity, or the negated L2 / L1 distance, so higher always means more consistent.
SimilarityResult similarity_score(std::span<const double> f_img, std::span<const double> f_text, Similarity kind);

inline constexpr std::size_t kDefaultHidden = 256;

struct ModelParams {
    AffParams aff;
    MlpParams head_v;
    MlpParams head_a;
    Similarity similarity = Similarity::Cosine;

    std::size_t dim() const { return aff.dim(); }

    static ModelParams init(std::size_t dim, Rng& rng, std::size_t aff_hidden = kDefaultHidden,
                            std::size_t mlp_hidden = kDefaultHidden, Similarity similarity = Similarity::Cosine);
    /// Zero tensors shaped like `like`.
    static ModelParams zeros_like(const ModelParams& like);

    void validate() const;
    std::vector<ParamBlock> blocks();
    std::vector<ConstParamBlock> blocks() const;
    std::size_t parameter_count() const;
};

struct ScoreTriple {
    double s_c = 0.0;
    double s_v = 0.0;
    double s_a = 0.0;
};

/// How the three scale features reach the fused feature.
struct FusionOptions {
    bool use_msi = true;     // false: every AFF input is the 1.0x feature
    bool use_aff = true;     // false: direct addition of the scale features
    bool plain_sum = false;  // with use_aff=false: sum instead of mean
};

struct ModelCache {
    FusionOptions fusion;
    std::optional<AffCache> aff;
    Vec fused;
    Vec sim_grad;
    MlpCache head_v;
    MlpCache head_a;
};

struct ModelOutput {
    ScoreTriple scores;
    ModelCache cache;
};

ModelOutput model_forward(const FeatureBundle& features, const ModelParams& p, const FusionOptions& fusion = {});

/// Accumulates dL/dtheta into `grads` for upstream score gradients.
void model_backward(const ModelCache& cache, const ModelParams& p, const ScoreTriple& d_scores, ModelParams& grads);

/// The fused image feature for the chosen fusion variant.
Vec fuse_features(const FeatureBundle& features, const AffParams& aff, const FusionOptions& fusion);

}  // namespace amff
