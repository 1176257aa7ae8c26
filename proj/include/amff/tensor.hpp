#pragma once

// Dense float64 primitives shared by every differentiable module.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace amff {

using Vec = std::vector<double>;

/// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Mat identity(std::size_t n);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Named view of one trainable tensor, used for optimisers, checksums and gradient checks.
struct ParamBlock {
    std::string name;
    std::span<double> values;
};

struct ConstParamBlock {
    std::string name;
    std::span<const double> values;
};

/// y = W x + b. Throws E_SHAPE on mismatch.
Vec affine_forward(const Mat& W, std::span<const double> b, std::span<const double> x);

/// y = W^T g.
Vec matvec_transposed(const Mat& W, std::span<const double> g);

/// G += a b^T.
void add_outer(Mat& G, std::span<const double> a, std::span<const double> b);

/// Numerically stable softmax (max subtraction).
Vec softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
bool all_finite(std::span<const double> v);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Reproducible random stream. Distributions are implemented here rather than
/// through <random> so that streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// Independent child stream, keyed by label.
    Rng derive(std::uint64_t stream) const;

    std::string serialize() const;
    static Rng deserialize(const std::string& state);

    bool operator==(const Rng& other) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Vec random_normal(Rng& rng, std::size_t n, double scale = 1.0);
Mat random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double bound);

/// Max over coordinates of |central difference - analytic| / max(1, |analytic|).
/// Throws E_NUMERIC when f returns a non-finite value.
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic_grad,
                         double eps = 1e-5);

}  // namespace amff
