#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "amff/error.hpp"
#include "amff/metrics.hpp"
#include "oracles.hpp"

using namespace amff;

namespace {

Vec random_vec(std::size_t n, Rng& rng, bool ties) {
    Vec v(n);
    for (double& x : v) x = ties ? static_cast<double>(rng.index(10)) : rng.normal();
    return v;
}

double logistic(double s, double k1, double k2, double k3, double k4) {
    return (k1 - k2) / (1.0 + std::exp(k4 * (s - k3))) + k2;
}

}  // namespace

TEST(Srcc, WorkedExamples) {
    EXPECT_DOUBLE_EQ(srcc(Vec{1, 2, 3, 4}, Vec{10, 20, 30, 40}), 1.0);
    EXPECT_DOUBLE_EQ(srcc(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}), -1.0);
    EXPECT_NEAR(srcc(Vec{1, 2, 3, 4, 5}, Vec{1, 3, 2, 5, 4}), 0.8, 1e-15);
}

TEST(Srcc, MatchesRankFormulaOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const bool ties = trial % 2 == 1;
        const Vec x = random_vec(40, rng, ties), y = random_vec(40, rng, ties);
        EXPECT_NEAR(srcc(x, y), oracle::spearman(x, y), 1e-12);
        EXPECT_NEAR(srcc(x, y), srcc(y, x), 1e-15);
    }
}

TEST(Srcc, FractionalRanks) {
    EXPECT_EQ(fractional_ranks(Vec{10, 20, 20, 5}), (Vec{2, 3.5, 3.5, 1}));
}

TEST(Krcc, WorkedExample) {
    EXPECT_NEAR(krcc(Vec{1, 2, 3}, Vec{2, 1, 3}), 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(krcc(Vec{1, 2, 3, 4}, Vec{1, 2, 3, 4}), 1.0);
}

TEST(Krcc, MatchesPairCountOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const bool ties = trial % 2 == 1;
        const Vec x = random_vec(100, rng, ties), y = random_vec(100, rng, ties);
        EXPECT_NEAR(krcc(x, y), oracle::kendall(x, y), 1e-12);
        EXPECT_NEAR(krcc(x, y), krcc(y, x), 1e-15);
    }
}

TEST(RankMetrics, InvariantUnderMonotoneTransforms) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec x = random_vec(50, rng, trial % 2 == 0), y = random_vec(50, rng, false);
        Vec ex = x, cy = y;
        for (double& v : ex) v = std::exp(v);
        for (double& v : cy) v = v * v * v;
        EXPECT_NEAR(srcc(ex, cy), srcc(x, y), 1e-12);
        EXPECT_NEAR(krcc(ex, cy), krcc(x, y), 1e-12);
        for (double r : {srcc(x, y), krcc(x, y)}) {
            EXPECT_GE(r, -1.0);
            EXPECT_LE(r, 1.0);
        }
    }
}

TEST(RankMetrics, RejectDegenerateInput) {
    EXPECT_THROW(srcc(Vec{1}, Vec{1}), Error);
    EXPECT_THROW(srcc(Vec{1, 2}, Vec{1, 2, 3}), Error);
    EXPECT_THROW(krcc(Vec{1, 1, 1}, Vec{1, 2, 3}), Error);
    EXPECT_THROW(pearson(Vec{2, 2, 2}, Vec{1, 2, 3}), Error);
}

TEST(Pearson, MatchesOracle) {
    Rng rng(4);
    const Vec x = random_vec(30, rng, false), y = random_vec(30, rng, false);
    EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-13);
}

TEST(Logistic, RecoversPlantedCurve) {
    const auto start = std::chrono::steady_clock::now();
    Vec s, g;
    for (int i = 0; i <= 120; ++i) {
        s.push_back(-3.0 + 6.0 * i / 120.0);
        g.push_back(logistic(s.back(), 5, 1, 0, -2));
    }
    const LogisticFit fit = logistic_fit_detailed(s, g);
    EXPECT_FALSE(fit.fallback);
    double sq = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sq += (fit.params(s[i]) - g[i]) * (fit.params(s[i]) - g[i]);
    EXPECT_LT(std::sqrt(sq / s.size()), 1e-6);
    for (std::size_t i = 1; i < fit.cost_trace.size(); ++i) EXPECT_LE(fit.cost_trace[i], fit.cost_trace[i - 1]);
    EXPECT_NEAR(plcc(s, g).plcc, 1.0, 1e-6);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Logistic, MidpointSymmetry) {
    const LogisticParams p{5.0, 1.0, 0.7, -2.0, false};
    EXPECT_NEAR(p(0.7), 3.0, 1e-15);
    LogisticParams id;
    id.identity = true;
    EXPECT_EQ(id(1.234), 1.234);
}

TEST(Logistic, CostTraceMonotoneOnNoisyData) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Vec s, g;
        for (int i = 0; i < 200; ++i) {
            s.push_back(rng.normal());
            g.push_back(std::tanh(1.5 * s.back()) + 0.3 * rng.normal());
        }
        const LogisticFit fit = logistic_fit_detailed(s, g);
        for (std::size_t i = 1; i < fit.cost_trace.size(); ++i) EXPECT_LE(fit.cost_trace[i], fit.cost_trace[i - 1]);
        if (fit.converged && !fit.fallback) EXPECT_GE(plcc(s, g).plcc, pearson(s, g) - 1e-9);
    }
}

TEST(Plcc, LinearDataDoesNotLoseCorrelation) {
    Rng rng(6);
    Vec s, g;
    for (int i = 0; i < 100; ++i) {
        s.push_back(rng.uniform(0.0, 1.0));
        g.push_back(2.0 * s.back() + 1.0 + 0.05 * rng.normal());
    }
    EXPECT_GE(plcc(s, g).plcc, pearson(s, g) - 1e-9);
}

TEST(Plcc, IndependentNoiseIsUncorrelated) {
    Rng rng(7);
    Vec s, g;
    for (int i = 0; i < 1000; ++i) {
        s.push_back(rng.normal());
        g.push_back(rng.normal());
    }
    EXPECT_LT(std::abs(plcc(s, g).plcc), 0.15);
}

TEST(Plcc, BeatsPearsonOnMonotoneNonlinearity) {
    Rng rng(8);
    Vec s, g;
    for (int i = 0; i < 300; ++i) {
        s.push_back(rng.uniform(-3.0, 3.0));
        g.push_back(std::tanh(s.back()));
    }
    EXPECT_GT(plcc(s, g).plcc, pearson(s, g));
}

TEST(Plcc, DecreasingRelationKeepsSign) {
    Vec s, g;
    for (int i = 0; i < 60; ++i) {
        s.push_back(-3.0 + 0.1 * i);
        g.push_back(logistic(s.back(), 1, 5, 0.2, -1.5));
    }
    EXPECT_NEAR(plcc(s, g).plcc, 1.0, 1e-6);
}

TEST(Median, WorkedCasesAndTrials) {
    EXPECT_EQ(median(Vec{0.1, 0.9, 0.2}), 0.2);
    EXPECT_EQ(median(Vec{4, 1, 3, 2}), 2.5);
    EXPECT_THROW(median(Vec{}), Error);

    Rng rng(9);
    std::vector<EvalResult> trials;
    Vec sr, pl, kr;
    for (int t = 0; t < 10; ++t) {
        EvalResult r;
        r.tasks.push_back(TaskMetrics{"quality", rng.uniform(), rng.uniform(), rng.uniform(), 10, {}});
        sr.push_back(r.tasks[0].srcc);
        pl.push_back(r.tasks[0].plcc);
        kr.push_back(r.tasks[0].krcc);
        trials.push_back(r);
    }
    const EvalResult m = median_of_trials(trials);
    EXPECT_EQ(m.tasks[0].srcc, oracle::median(sr));
    EXPECT_EQ(m.tasks[0].plcc, oracle::median(pl));
    EXPECT_EQ(m.tasks[0].krcc, oracle::median(kr));
    EXPECT_EQ(median_of_trials({trials[3]}).tasks[0].srcc, trials[3].tasks[0].srcc);
    EXPECT_THROW(median_of_trials({}), Error);
}

TEST(Evaluate, TaskMetricsAndMean) {
    const TaskMetrics m = evaluate_task("quality", Vec{1, 2, 3, 4, 5}, Vec{1, 3, 2, 5, 4});
    EXPECT_EQ(m.task, "quality");
    EXPECT_EQ(m.n, 5u);
    EXPECT_NEAR(m.srcc, 0.8, 1e-15);
    EvalResult r;
    const Vec x{1, 2, 3, 4, 5}, y{2, 1, 3, 5, 4};
    r.tasks = {m, evaluate_task("consistency", x, y)};
    EXPECT_NEAR(r.mean_srcc(), (0.8 + oracle::spearman(x, y)) / 2.0, 1e-15);
    EXPECT_THROW(evaluate_task("consistency", Vec{1, 2, 3}, Vec{2, 1, 3}), Error);
    ASSERT_NE(r.find("consistency"), nullptr);
    EXPECT_EQ(r.find("authenticity"), nullptr);
}
