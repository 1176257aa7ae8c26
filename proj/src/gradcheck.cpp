#include "amff/gradcheck.hpp"

#include <cmath>

#include "amff/aff.hpp"
#include "amff/losses.hpp"
#include "amff/scoring.hpp"
#include "amff/tensor.hpp"

namespace amff {

namespace {

// Checks d(loss)/d(block) where loss() reads the block in place.
double check_in_place(std::span<double> block, std::span<const double> analytic, const std::function<double()>& loss,
                      double eps) {
    const Vec original(block.begin(), block.end());
    const double err = finite_diff_check(
        [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), block.begin());
            return loss();
        },
        original, analytic, eps);
    std::copy(original.begin(), original.end(), block.begin());
    return err;
}

AffParams random_aff(std::size_t d, std::size_t h, Rng& rng) {
    AffParams p = AffParams::init(d, h, rng);
    for (double& x : p.w1.data) x *= 2.0;
    for (double& x : p.w2.data) x *= 2.0;
    p.b1 = random_normal(rng, h, 0.3);
    p.b2 = random_normal(rng, d, 0.3);
    return p;
}

MlpParams random_mlp(std::size_t d, std::size_t h, Rng& rng) {
    MlpParams p = MlpParams::init(d, h, rng);
    p.b1 = random_normal(rng, h, 0.3);
    p.b2 = random_normal(rng, 1, 0.3);
    return p;
}

FeatureBundle random_bundle(std::size_t d, Rng& rng) {
    return FeatureBundle{random_normal(rng, d), random_normal(rng, d), random_normal(rng, d), random_normal(rng, d)};
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck(std::uint64_t seed, const GradcheckOptions& opt) {
    Rng rng(seed);
    const std::size_t d = opt.dim;
    const std::size_t h = opt.hidden;
    std::vector<GradcheckEntry> out;

    // AFF: scalar loss r . F_I.
    {
        AffParams p = random_aff(d, h, rng);
        Vec f05 = random_normal(rng, d), f10 = random_normal(rng, d), f15 = random_normal(rng, d);
        const Vec r = random_normal(rng, d);
        auto loss = [&] { return dot(r, aff_forward(f05, f10, f15, p).fused); };
        const AffGrads g = aff_backward(aff_forward(f05, f10, f15, p).cache, p, r);
        auto pb = p.blocks();
        const auto gb = g.params.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b) {
            out.push_back({pb[b].name, check_in_place(pb[b].values, gb[b].values, loss, opt.eps)});
        }
        out.push_back({"aff.f_05", check_in_place(f05, g.df_05, loss, opt.eps)});
        out.push_back({"aff.f_10", check_in_place(f10, g.df_10, loss, opt.eps)});
        out.push_back({"aff.f_15", check_in_place(f15, g.df_15, loss, opt.eps)});
    }

    // Heads: squared error against a target.
    for (const char* name : {"head_v", "head_a"}) {
        MlpParams p = random_mlp(d, h, rng);
        Vec x = random_normal(rng, d);
        const double target = rng.normal();
        auto loss = [&] {
            const double e = mlp_forward(p, x).y - target;
            return e * e;
        };
        const MlpOutput fwd = mlp_forward(p, x);
        MlpParams g = MlpParams::zeros(d, h);
        const Vec dx = mlp_backward(fwd.cache, p, 2.0 * (fwd.y - target), g);
        auto pb = p.blocks(name);
        const auto gb = g.blocks(name);
        for (std::size_t b = 0; b < pb.size(); ++b) {
            out.push_back({pb[b].name, check_in_place(pb[b].values, gb[b].values, loss, opt.eps)});
        }
        out.push_back({std::string(name) + ".input", check_in_place(x, dx, loss, opt.eps)});
    }

    for (Similarity kind : {Similarity::Cosine, Similarity::Euclidean, Similarity::Manhattan}) {
        Vec img = random_normal(rng, d);
        const Vec text = random_normal(rng, d);
        const auto res = similarity_score(img, text, kind);
        auto loss = [&] { return similarity_score(img, text, kind).score; };
        out.push_back({std::string("similarity.") + similarity_name(kind), check_in_place(img, res.grad_img, loss, opt.eps)});
    }

    {
        BatchScores b{random_normal(rng, opt.batch), random_normal(rng, opt.batch)};
        const auto res = fidelity_loss(b);
        out.push_back({"loss.fidelity", check_in_place(b.preds, res.dpreds, [&] { return fidelity_loss(b).loss; },
                                                       opt.eps)});
    }
    {
        BatchScores b{random_normal(rng, opt.batch), random_normal(rng, opt.batch)};
        const auto res = mse_loss(b);
        out.push_back({"loss.mse", check_in_place(b.preds, res.dpreds, [&] { return mse_loss(b).loss; }, opt.eps)});
    }

    // End to end: total loss over a small batch, all model parameters.
    {
        ModelParams p;
        p.aff = random_aff(d, h, rng);
        p.head_v = random_mlp(d, h, rng);
        p.head_a = random_mlp(d, h, rng);
        std::vector<FeatureBundle> batch;
        BatchScores c, v, a;
        for (std::size_t i = 0; i < opt.batch; ++i) {
            batch.push_back(random_bundle(d, rng));
            c.gts.push_back(rng.uniform());
            v.gts.push_back(rng.uniform());
            a.gts.push_back(rng.uniform());
        }
        auto forward = [&](std::vector<ModelOutput>* outs) {
            BatchScores cc = c, vv = v, aa = a;
            cc.preds.clear();
            vv.preds.clear();
            aa.preds.clear();
            for (const auto& f : batch) {
                ModelOutput o = model_forward(f, p);
                cc.preds.push_back(o.scores.s_c);
                vv.preds.push_back(o.scores.s_v);
                aa.preds.push_back(o.scores.s_a);
                if (outs) outs->push_back(std::move(o));
            }
            return total_loss(cc, vv, aa, TaskMask{});
        };
        std::vector<ModelOutput> outs;
        const LossBundle lb = forward(&outs);
        ModelParams g = ModelParams::zeros_like(p);
        for (std::size_t i = 0; i < outs.size(); ++i) {
            model_backward(outs[i].cache, p, ScoreTriple{lb.d_consistency[i], lb.d_quality[i], lb.d_authenticity[i]}, g);
        }
        auto loss = [&] { return forward(nullptr).total; };
        auto pb = p.blocks();
        const auto gb = g.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b) {
            out.push_back({"model." + pb[b].name, check_in_place(pb[b].values, gb[b].values, loss, opt.eps)});
        }
    }
    return out;
}

}  // namespace amff
