#include "amff/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "amff/error.hpp"

namespace amff {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
    require(x.size() == y.size(), ErrorCode::Shape, std::string(what) + ": inputs differ in length");
    require(x.size() >= 2, ErrorCode::Value, std::string(what) + ": needs at least 2 samples");
    require(all_finite(x) && all_finite(y), ErrorCode::Numeric, std::string(what) + ": non-finite input");
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, "pearson");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, ErrorCode::Numeric, "correlation undefined for a constant vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Vec fractional_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vec ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        // Positions i..j-1 (0-based) share the mean 1-based rank.
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, "srcc");
    const Vec rx = fractional_ranks(x);
    const Vec ry = fractional_ranks(y);
    return pearson(rx, ry);
}

namespace {

// Sum over tie groups of t(t-1)/2 in an already sorted range (by `key`).
template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq equal) {
    std::uint64_t total = 0;
    std::uint64_t run = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (equal(i - 1, i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total + run * (run - 1) / 2;
}

// Merge sort on `v`, returning the number of inversions.
std::uint64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t swaps = sort_count_swaps(v, buf, lo, mid) + sort_count_swaps(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

double krcc(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, "krcc");
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t ties_x = tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
    const std::uint64_t ties_xy =
        tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
    std::vector<double> buf(n);
    const std::uint64_t swaps = sort_count_swaps(ys, buf, 0, n);
    const std::uint64_t ties_y = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
    require(ties_x < n0 && ties_y < n0, ErrorCode::Numeric, "correlation undefined for a constant vector");

    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
    const double numer = static_cast<double>(static_cast<std::int64_t>(n0 - ties_x - ties_y + ties_xy) -
                                             2 * static_cast<std::int64_t>(swaps));
    const double denom = std::sqrt(static_cast<double>(n0 - ties_x)) * std::sqrt(static_cast<double>(n0 - ties_y));
    return std::clamp(numer / denom, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Four-parameter logistic

namespace {

// sigma(-t) computed without overflow.
double sigmoid_neg(double t) {
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

double logistic_cost(const Eigen::Vector4d& k, std::span<const double> s, std::span<const double> g) {
    const LogisticParams p{k[0], k[1], k[2], k[3], false};
    double cost = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = g[i] - p(s[i]);
        cost += r * r;
    }
    return cost;
}

}  // namespace

double LogisticParams::operator()(double s) const {
    if (identity) return s;
    return (k1 - k2) * sigmoid_neg(k4 * (s - k3)) + k2;
}

LogisticFit logistic_fit_detailed(std::span<const double> preds, std::span<const double> gts) {
    check_pair(preds, gts, "logistic_fit");
    const std::size_t n = preds.size();
    require(n >= 5, ErrorCode::Value, "logistic_fit: needs at least 5 samples");
    const auto [pmin, pmax] = std::minmax_element(preds.begin(), preds.end());
    require(*pmax > *pmin, ErrorCode::Numeric, "logistic_fit: predictions are constant");
    const auto [gmin, gmax] = std::minmax_element(gts.begin(), gts.end());

    double direction = 1.0;
    if (*gmax > *gmin && pearson(preds, gts) < 0.0) direction = -1.0;

    Eigen::Vector4d k(*gmax, *gmin, mean_of(preds), -direction * 4.0 / (*pmax - *pmin));
    LogisticFit fit;
    double cost = logistic_cost(k, preds, gts);
    fit.cost_trace.push_back(cost);

    constexpr std::size_t kMaxIterations = 200;
    constexpr double kRelTol = 1e-10;
    double lambda = 1e-3;
    Eigen::MatrixXd jac(n, 4);
    Eigen::VectorXd resid(n);
    bool need_jacobian = true;
    Eigen::Matrix4d jtj;
    Eigen::Vector4d jtr;

    while (fit.iterations < kMaxIterations) {
        if (need_jacobian) {
            for (std::size_t i = 0; i < n; ++i) {
                const double t = k[3] * (preds[i] - k[2]);
                const double lo = sigmoid_neg(t);
                const double hi = 1.0 - lo;
                const double amp = k[0] - k[1];
                jac(static_cast<Eigen::Index>(i), 0) = lo;
                jac(static_cast<Eigen::Index>(i), 1) = hi;
                jac(static_cast<Eigen::Index>(i), 2) = amp * lo * hi * k[3];
                jac(static_cast<Eigen::Index>(i), 3) = -amp * lo * hi * (preds[i] - k[2]);
                resid[static_cast<Eigen::Index>(i)] = gts[i] - ((k[0] - k[1]) * lo + k[1]);
            }
            jtj = jac.transpose() * jac;
            jtr = jac.transpose() * resid;
            need_jacobian = false;
        }
        ++fit.iterations;
        Eigen::Matrix4d a = jtj;
        for (int d = 0; d < 4; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
        const Eigen::Vector4d step = a.ldlt().solve(jtr);
        const Eigen::Vector4d candidate = k + step;
        const double new_cost = step.allFinite() ? logistic_cost(candidate, preds, gts)
                                                 : std::numeric_limits<double>::infinity();
        if (std::isfinite(new_cost) && new_cost < cost) {
            const double rel = (cost - new_cost) / cost;
            k = candidate;
            cost = new_cost;
            fit.cost_trace.push_back(cost);
            lambda = std::max(lambda / 10.0, 1e-15);
            need_jacobian = true;
            if (rel < kRelTol || cost == 0.0) {
                fit.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e16) {
                // No descent direction left at machine precision.
                fit.converged = true;
                break;
            }
        }
    }
    if (fit.iterations >= kMaxIterations) fit.converged = true;

    fit.params = LogisticParams{k[0], k[1], k[2], k[3], false};
    if (!k.allFinite() || !std::isfinite(cost)) {
        fit.params = LogisticParams{};
        fit.params.identity = true;
        fit.fallback = true;
        fit.converged = false;
    }
    return fit;
}

LogisticParams logistic_fit(std::span<const double> preds, std::span<const double> gts) {
    return logistic_fit_detailed(preds, gts).params;
}

PlccResult plcc(std::span<const double> preds, std::span<const double> gts) {
    PlccResult out;
    out.params = logistic_fit(preds, gts);
    Vec mapped(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) mapped[i] = out.params(preds[i]);
    const auto [mmin, mmax] = std::minmax_element(mapped.begin(), mapped.end());
    if (*mmin == *mmax) {
        // A fully saturated fit carries no linear information; fall back to the raw scores.
        out.params = LogisticParams{};
        out.params.identity = true;
        out.plcc = pearson(preds, gts);
        return out;
    }
    out.plcc = pearson(mapped, gts);
    return out;
}

TaskMetrics evaluate_task(const std::string& task, std::span<const double> preds, std::span<const double> gts) {
    TaskMetrics m;
    m.task = task;
    m.n = preds.size();
    m.srcc = srcc(preds, gts);
    m.krcc = krcc(preds, gts);
    const auto p = plcc(preds, gts);
    m.plcc = p.plcc;
    m.logistic = p.params;
    return m;
}

const TaskMetrics* EvalResult::find(const std::string& task) const {
    for (const auto& t : tasks) {
        if (t.task == task) return &t;
    }
    return nullptr;
}

double EvalResult::mean_srcc() const {
    require(!tasks.empty(), ErrorCode::Value, "evaluation has no tasks");
    double s = 0.0;
    for (const auto& t : tasks) s += t.srcc;
    return s / static_cast<double>(tasks.size());
}

double median(std::vector<double> values) {
    require(!values.empty(), ErrorCode::Value, "median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    if (values.size() % 2 == 1) return values[m];
    return 0.5 * (values[m - 1] + values[m]);
}

EvalResult median_of_trials(const std::vector<EvalResult>& results) {
    require(!results.empty(), ErrorCode::Value, "median_of_trials: no trials");
    EvalResult out;
    for (const TaskMetrics& first : results.front().tasks) {
        std::vector<double> s, p, k, n;
        for (const EvalResult& r : results) {
            const TaskMetrics* t = r.find(first.task);
            require(t != nullptr, ErrorCode::Value, "median_of_trials: task '" + first.task + "' missing in a trial");
            s.push_back(t->srcc);
            p.push_back(t->plcc);
            k.push_back(t->krcc);
            n.push_back(static_cast<double>(t->n));
        }
        TaskMetrics m = first;
        m.srcc = median(s);
        m.plcc = median(p);
        m.krcc = median(k);
        m.n = static_cast<std::size_t>(median(n));
        out.tasks.push_back(m);
    }
    return out;
}

}  // namespace amff
