#include "amff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "amff/error.hpp"

namespace amff {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vec affine_forward(const Mat& W, std::span<const double> b, std::span<const double> x) {
    require(W.cols == x.size() && W.rows == b.size(), ErrorCode::Shape,
            "affine_forward: W is " + std::to_string(W.rows) + "x" + std::to_string(W.cols) +
                ", b has " + std::to_string(b.size()) + ", x has " + std::to_string(x.size()));
    Vec y(W.rows);
    for (std::size_t r = 0; r < W.rows; ++r) {
        const double* w = W.data.data() + r * W.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < W.cols; ++c) acc += w[c] * x[c];
        y[r] = acc + b[r];
    }
    return y;
}

Vec matvec_transposed(const Mat& W, std::span<const double> g) {
    require(W.rows == g.size(), ErrorCode::Shape, "matvec_transposed: row count mismatch");
    Vec y(W.cols, 0.0);
    for (std::size_t r = 0; r < W.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* w = W.data.data() + r * W.cols;
        for (std::size_t c = 0; c < W.cols; ++c) y[c] += gr * w[c];
    }
    return y;
}

void add_outer(Mat& G, std::span<const double> a, std::span<const double> b) {
    require(G.rows == a.size() && G.cols == b.size(), ErrorCode::Shape, "add_outer: shape mismatch");
    for (std::size_t r = 0; r < G.rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* g = G.data.data() + r * G.cols;
        for (std::size_t c = 0; c < G.cols; ++c) g[c] += ar * b[c];
    }
}

Vec softmax(std::span<const double> v) {
    require(!v.empty(), ErrorCode::Shape, "softmax: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    Vec out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& o : out) o /= sum;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::Shape, "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), ErrorCode::Shape, "axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
    require(n > 0, ErrorCode::Value, "Rng::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

Rng Rng::derive(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 1))); }

std::string Rng::serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::hexfloat << spare_ << std::defaultfloat << ' ' << engine_;
    return os.str();
}

Rng Rng::deserialize(const std::string& state) {
    std::istringstream is(state);
    Rng rng;
    int spare_flag = 0;
    std::string spare_text;
    is >> rng.seed_ >> spare_flag >> spare_text >> rng.engine_;
    require(!is.fail(), ErrorCode::Format, "Rng::deserialize: malformed state");
    rng.has_spare_ = spare_flag != 0;
    rng.spare_ = std::strtod(spare_text.c_str(), nullptr);
    return rng;
}

bool Rng::operator==(const Rng& other) const {
    return seed_ == other.seed_ && engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
           (!has_spare_ || spare_ == other.spare_);
}

Vec random_normal(Rng& rng, std::size_t n, double scale) {
    Vec v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

Mat random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
    Mat m(rows, cols);
    for (double& x : m.data) x = rng.uniform(-bound, bound);
    return m;
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic_grad,
                         double eps) {
    require(eps > 0.0, ErrorCode::Value, "finite_diff_check: eps must be positive");
    require(x.size() == analytic_grad.size(), ErrorCode::Shape,
            "finite_diff_check: gradient length mismatch");
    Vec probe(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.size(); ++k) {
        const double saved = probe[k];
        probe[k] = saved + eps;
        const double plus = f(probe);
        probe[k] = saved - eps;
        const double minus = f(probe);
        probe[k] = saved;
        require(std::isfinite(plus) && std::isfinite(minus), ErrorCode::Numeric,
                "finite_diff_check: non-finite objective at coordinate " + std::to_string(k));
        const double numeric = (plus - minus) / (2.0 * eps);
        const double err = std::abs(numeric - analytic_grad[k]) / std::max(1.0, std::abs(analytic_grad[k]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace amff
