#include "amff/aff.hpp"

#include <algorithm>
#include <cmath>

#include "amff/error.hpp"

namespace amff {

AffParams AffParams::init(std::size_t dim, std::size_t hidden, Rng& rng) {
    require(dim > 0 && hidden > 0, ErrorCode::Value, "AFF dimensions must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(dim + hidden));
    AffParams p;
    p.w1 = random_uniform(rng, hidden, dim, bound);
    p.b1 = Vec(hidden, 0.0);
    p.w2 = random_uniform(rng, dim, hidden, bound);
    p.b2 = Vec(dim, 0.0);
    return p;
}

AffParams AffParams::zeros(std::size_t dim, std::size_t hidden) {
    return AffParams{Mat(hidden, dim), Vec(hidden, 0.0), Mat(dim, hidden), Vec(dim, 0.0)};
}

void AffParams::validate() const {
    require(w1.rows > 0 && w1.cols > 0, ErrorCode::Shape, "AFF: empty first layer");
    require(b1.size() == w1.rows && w2.rows == w1.cols && w2.cols == w1.rows && b2.size() == w1.cols,
            ErrorCode::Shape, "AFF: inconsistent layer shapes");
}

std::vector<ParamBlock> AffParams::blocks() {
    return {{"aff.w1", w1.data}, {"aff.b1", b1}, {"aff.w2", w2.data}, {"aff.b2", b2}};
}

std::vector<ConstParamBlock> AffParams::blocks() const {
    return {{"aff.w1", w1.data}, {"aff.b1", b1}, {"aff.w2", w2.data}, {"aff.b2", b2}};
}

AffOutput aff_forward(std::span<const double> f_05, std::span<const double> f_10, std::span<const double> f_15,
                      const AffParams& p) {
    const std::size_t d = f_10.size();
    require(f_05.size() == d && f_15.size() == d, ErrorCode::Shape, "AFF: scale features differ in dimension");
    require(p.dim() == d, ErrorCode::Shape,
            "AFF: parameters expect dimension " + std::to_string(p.dim()) + ", got " + std::to_string(d));
    const std::size_t h = p.hidden();

    AffOutput out;
    AffCache& c = out.cache;
    c.stacked = Mat(kScaleCount, d);
    c.pre = Mat(kScaleCount, h);
    c.hidden = Mat(kScaleCount, h);
    c.logits = Mat(kScaleCount, d);
    c.weights = Mat(kScaleCount, d);
    const std::array<std::span<const double>, kScaleCount> rows{f_05, f_10, f_15};

    for (std::size_t r = 0; r < kScaleCount; ++r) {
        std::copy(rows[r].begin(), rows[r].end(), c.stacked.row(r).begin());
        const Vec pre = affine_forward(p.w1, p.b1, rows[r]);
        std::copy(pre.begin(), pre.end(), c.pre.row(r).begin());
        auto hid = c.hidden.row(r);
        for (std::size_t k = 0; k < h; ++k) hid[k] = pre[k] > 0.0 ? pre[k] : 0.0;
        const Vec logit = affine_forward(p.w2, p.b2, hid);
        std::copy(logit.begin(), logit.end(), c.logits.row(r).begin());
    }

    out.fused.resize(d);
    for (std::size_t ch = 0; ch < d; ++ch) {
        const std::array<double, kScaleCount> column{c.logits(kRow05, ch), c.logits(kRow10, ch), c.logits(kRow15, ch)};
        const Vec a = softmax(column);
        for (std::size_t r = 0; r < kScaleCount; ++r) c.weights(r, ch) = a[r];
        // Same value as sum_r a_r x_r, but exact when the three inputs coincide.
        const double fused = f_10[ch] + a[kRow05] * (f_05[ch] - f_10[ch]) + a[kRow15] * (f_15[ch] - f_10[ch]);
        // Rounding can land one ulp outside the convex hull of the inputs.
        const auto [lo, hi] = std::minmax({f_05[ch], f_10[ch], f_15[ch]});
        out.fused[ch] = std::clamp(fused, lo, hi);
    }
    return out;
}

void aff_backward(const AffCache& cache, const AffParams& p, std::span<const double> d_fused, AffGrads& out) {
    const std::size_t d = p.dim();
    const std::size_t h = p.hidden();
    require(cache.stacked.rows == kScaleCount && cache.stacked.cols == d && cache.pre.cols == h, ErrorCode::Shape,
            "AFF backward: cache does not match parameters");
    require(d_fused.size() == d, ErrorCode::Shape, "AFF backward: gradient has wrong dimension");
    require(out.params.w1.rows == h && out.params.w1.cols == d, ErrorCode::Shape,
            "AFF backward: gradient buffer has wrong shape");

    std::array<Vec*, kScaleCount> dx{&out.df_05, &out.df_10, &out.df_15};
    Mat d_logits(kScaleCount, d);
    for (std::size_t r = 0; r < kScaleCount; ++r) dx[r]->assign(d, 0.0);

    for (std::size_t ch = 0; ch < d; ++ch) {
        const double g = d_fused[ch];
        // dF/dA_r = x_r; softmax Jacobian: dz_r = A_r (dA_r - sum_s A_s dA_s).
        double mean = 0.0;
        for (std::size_t r = 0; r < kScaleCount; ++r) mean += cache.weights(r, ch) * g * cache.stacked(r, ch);
        for (std::size_t r = 0; r < kScaleCount; ++r) {
            const double a = cache.weights(r, ch);
            d_logits(r, ch) = a * (g * cache.stacked(r, ch) - mean);
            (*dx[r])[ch] = g * a;
        }
    }

    for (std::size_t r = 0; r < kScaleCount; ++r) {
        const auto dz = d_logits.row(r);
        add_outer(out.params.w2, dz, cache.hidden.row(r));
        axpy(1.0, dz, out.params.b2);
        Vec d_pre = matvec_transposed(p.w2, dz);
        const auto pre = cache.pre.row(r);
        for (std::size_t k = 0; k < h; ++k) {
            if (pre[k] <= 0.0) d_pre[k] = 0.0;
        }
        add_outer(out.params.w1, d_pre, cache.stacked.row(r));
        axpy(1.0, d_pre, out.params.b1);
        const Vec back = matvec_transposed(p.w1, d_pre);
        axpy(1.0, back, *dx[r]);
    }
}

AffGrads aff_backward(const AffCache& cache, const AffParams& p, std::span<const double> d_fused) {
    AffGrads g;
    g.params = AffParams::zeros(p.dim(), p.hidden());
    aff_backward(cache, p, d_fused, g);
    return g;
}

}  // namespace amff
