#include "amff/scoring.hpp"

#include <cmath>

#include "amff/error.hpp"

namespace amff {

MlpParams MlpParams::init(std::size_t dim, std::size_t hidden, Rng& rng) {
    require(dim > 0 && hidden > 0, ErrorCode::Value, "MLP dimensions must be positive");
    MlpParams p;
    p.w1 = random_uniform(rng, hidden, dim, std::sqrt(6.0 / static_cast<double>(dim + hidden)));
    p.b1 = Vec(hidden, 0.0);
    p.w2 = random_uniform(rng, 1, hidden, std::sqrt(6.0 / static_cast<double>(hidden + 1)));
    p.b2 = Vec(1, 0.0);
    return p;
}

MlpParams MlpParams::zeros(std::size_t dim, std::size_t hidden) {
    return MlpParams{Mat(hidden, dim), Vec(hidden, 0.0), Mat(1, hidden), Vec(1, 0.0)};
}

void MlpParams::validate() const {
    require(w1.rows > 0 && w1.cols > 0, ErrorCode::Shape, "MLP: empty first layer");
    require(b1.size() == w1.rows && w2.rows == 1 && w2.cols == w1.rows && b2.size() == 1, ErrorCode::Shape,
            "MLP: inconsistent layer shapes");
}

std::vector<ParamBlock> MlpParams::blocks(const std::string& prefix) {
    return {{prefix + ".w1", w1.data}, {prefix + ".b1", b1}, {prefix + ".w2", w2.data}, {prefix + ".b2", b2}};
}

std::vector<ConstParamBlock> MlpParams::blocks(const std::string& prefix) const {
    return {{prefix + ".w1", w1.data}, {prefix + ".b1", b1}, {prefix + ".w2", w2.data}, {prefix + ".b2", b2}};
}

MlpOutput mlp_forward(const MlpParams& p, std::span<const double> x) {
    require(x.size() == p.dim(), ErrorCode::Shape,
            "MLP: expected input dimension " + std::to_string(p.dim()) + ", got " + std::to_string(x.size()));
    MlpOutput out;
    out.cache.x.assign(x.begin(), x.end());
    out.cache.pre = affine_forward(p.w1, p.b1, x);
    out.cache.hidden.resize(out.cache.pre.size());
    for (std::size_t k = 0; k < out.cache.pre.size(); ++k) {
        out.cache.hidden[k] = out.cache.pre[k] > 0.0 ? out.cache.pre[k] : 0.0;
    }
    out.y = affine_forward(p.w2, p.b2, out.cache.hidden)[0];
    return out;
}

Vec mlp_backward(const MlpCache& cache, const MlpParams& p, double dy, MlpParams& grads) {
    require(cache.x.size() == p.dim() && cache.pre.size() == p.hidden(), ErrorCode::Shape,
            "MLP backward: cache does not match parameters");
    require(grads.w1.rows == p.hidden() && grads.w1.cols == p.dim(), ErrorCode::Shape,
            "MLP backward: gradient buffer has wrong shape");
    const std::size_t h = p.hidden();
    Vec d_pre(h);
    for (std::size_t k = 0; k < h; ++k) {
        grads.w2.data[k] += dy * cache.hidden[k];
        d_pre[k] = cache.pre[k] > 0.0 ? dy * p.w2.data[k] : 0.0;
    }
    grads.b2[0] += dy;
    add_outer(grads.w1, d_pre, cache.x);
    axpy(1.0, d_pre, grads.b1);
    return matvec_transposed(p.w1, d_pre);
}

const char* similarity_name(Similarity kind) noexcept {
    switch (kind) {
        case Similarity::Cosine: return "cosine";
        case Similarity::Euclidean: return "euclidean";
        case Similarity::Manhattan: return "manhattan";
    }
    return "unknown";
}

Similarity parse_similarity(const std::string& name) {
    if (name == "cosine") return Similarity::Cosine;
    if (name == "euclidean") return Similarity::Euclidean;
    if (name == "manhattan") return Similarity::Manhattan;
    fail(ErrorCode::Value, "unknown similarity '" + name + "' (expected cosine, euclidean or manhattan)");
}

SimilarityResult similarity_score(std::span<const double> f_img, std::span<const double> f_text, Similarity kind) {
    require(f_img.size() == f_text.size(), ErrorCode::Shape, "similarity: feature dimensions differ");
    const std::size_t d = f_img.size();
    SimilarityResult res;
    res.grad_img.assign(d, 0.0);
    switch (kind) {
        case Similarity::Cosine: {
            const double ni = norm2(f_img);
            const double nt = norm2(f_text);
            require(ni > 0.0 && nt > 0.0, ErrorCode::Numeric, "cosine similarity of a zero-norm feature");
            res.score = dot(f_img, f_text) / (ni * nt);
            for (std::size_t k = 0; k < d; ++k) {
                res.grad_img[k] = f_text[k] / (ni * nt) - res.score * f_img[k] / (ni * ni);
            }
            break;
        }
        case Similarity::Euclidean: {
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) sq += (f_img[k] - f_text[k]) * (f_img[k] - f_text[k]);
            const double dist = std::sqrt(sq);
            res.score = -dist;
            if (dist > 0.0) {
                for (std::size_t k = 0; k < d; ++k) res.grad_img[k] = -(f_img[k] - f_text[k]) / dist;
            }
            break;
        }
        case Similarity::Manhattan: {
            double dist = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = f_img[k] - f_text[k];
                dist += std::abs(diff);
                res.grad_img[k] = diff > 0.0 ? -1.0 : (diff < 0.0 ? 1.0 : 0.0);
            }
            res.score = -dist;
            break;
        }
    }
    return res;
}

ModelParams ModelParams::init(std::size_t dim, Rng& rng, std::size_t aff_hidden, std::size_t mlp_hidden,
                              Similarity similarity) {
    ModelParams p;
    p.aff = AffParams::init(dim, aff_hidden, rng);
    p.head_v = MlpParams::init(dim, mlp_hidden, rng);
    p.head_a = MlpParams::init(dim, mlp_hidden, rng);
    p.similarity = similarity;
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& like) {
    ModelParams p;
    p.aff = AffParams::zeros(like.aff.dim(), like.aff.hidden());
    p.head_v = MlpParams::zeros(like.head_v.dim(), like.head_v.hidden());
    p.head_a = MlpParams::zeros(like.head_a.dim(), like.head_a.hidden());
    p.similarity = like.similarity;
    return p;
}

void ModelParams::validate() const {
    aff.validate();
    head_v.validate();
    head_a.validate();
    require(head_v.dim() == aff.dim() && head_a.dim() == aff.dim(), ErrorCode::Shape,
            "model: head input dimension differs from fusion dimension");
}

std::vector<ParamBlock> ModelParams::blocks() {
    auto out = aff.blocks();
    for (auto& b : head_v.blocks("head_v")) out.push_back(b);
    for (auto& b : head_a.blocks("head_a")) out.push_back(b);
    return out;
}

std::vector<ConstParamBlock> ModelParams::blocks() const {
    auto out = aff.blocks();
    for (auto& b : head_v.blocks("head_v")) out.push_back(b);
    for (auto& b : head_a.blocks("head_a")) out.push_back(b);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.values.size();
    return n;
}

namespace {

// The mean is written as an offset from f_10 so equal scales return f_10 exactly.
Vec average_scales(const FeatureBundle& f, bool plain_sum) {
    Vec out(f.dim());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = plain_sum ? f.f_05[k] + f.f_10[k] + f.f_15[k]
                           : f.f_10[k] + ((f.f_05[k] - f.f_10[k]) + (f.f_15[k] - f.f_10[k])) / 3.0;
    }
    return out;
}

}  // namespace

ModelOutput model_forward(const FeatureBundle& features, const ModelParams& p, const FusionOptions& fusion) {
    require(features.dim() == p.dim(), ErrorCode::Shape,
            "model expects feature dimension " + std::to_string(p.dim()) + ", got " +
                std::to_string(features.dim()));
    features.validate();
    ModelOutput out;
    ModelCache& c = out.cache;
    c.fusion = fusion;
    if (fusion.use_aff) {
        AffOutput fused = fusion.use_msi ? aff_forward(features.f_05, features.f_10, features.f_15, p.aff)
                                         : aff_forward(features.f_10, features.f_10, features.f_10, p.aff);
        c.fused = std::move(fused.fused);
        c.aff = std::move(fused.cache);
    } else if (fusion.use_msi) {
        c.fused = average_scales(features, fusion.plain_sum);
    } else {
        c.fused = features.f_10;
        if (fusion.plain_sum) {
            for (double& x : c.fused) x *= 3.0;
        }
    }

    auto v = mlp_forward(p.head_v, c.fused);
    auto a = mlp_forward(p.head_a, c.fused);
    auto sim = similarity_score(c.fused, features.f_text, p.similarity);
    out.scores = ScoreTriple{sim.score, v.y, a.y};
    c.head_v = std::move(v.cache);
    c.head_a = std::move(a.cache);
    c.sim_grad = std::move(sim.grad_img);
    return out;
}

void model_backward(const ModelCache& cache, const ModelParams& p, const ScoreTriple& d_scores, ModelParams& grads) {
    const std::size_t d = p.dim();
    Vec d_fused(d, 0.0);
    if (d_scores.s_v != 0.0) axpy(1.0, mlp_backward(cache.head_v, p.head_v, d_scores.s_v, grads.head_v), d_fused);
    if (d_scores.s_a != 0.0) axpy(1.0, mlp_backward(cache.head_a, p.head_a, d_scores.s_a, grads.head_a), d_fused);
    if (d_scores.s_c != 0.0) axpy(d_scores.s_c, cache.sim_grad, d_fused);
    if (cache.aff) {
        AffGrads g;
        g.params = std::move(grads.aff);
        aff_backward(*cache.aff, p.aff, d_fused, g);
        grads.aff = std::move(g.params);
    }
}

Vec fuse_features(const FeatureBundle& features, const AffParams& aff, const FusionOptions& fusion) {
    if (fusion.use_aff) {
        return fusion.use_msi ? aff_forward(features.f_05, features.f_10, features.f_15, aff).fused
                              : aff_forward(features.f_10, features.f_10, features.f_10, aff).fused;
    }
    if (fusion.use_msi) return average_scales(features, fusion.plain_sum);
    Vec out = features.f_10;
    if (fusion.plain_sum) {
        for (double& x : out) x *= 3.0;
    }
    return out;
}

}  // namespace amff
