#include "bassmt/quadrature.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bassmt/errors.hpp"

namespace bassmt {

void gauss_hermite_1d(std::size_t n, Vec& nodes, Vec& weights) {
    if (n == 0) throw QuadratureError("Gauss-Hermite rule needs at least one node");
    const auto N = static_cast<Eigen::Index>(n);
    // Golub-Welsch: eigenvalues of the Jacobi matrix of the orthonormal
    // probabilists' Hermite recurrence give the nodes.
    Mat jacobi = Mat::Zero(N, N);
    for (Eigen::Index k = 1; k < N; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
    nodes = eig.eigenvalues();
    weights.resize(N);

    // Newton polish on the orthonormal recurrence, then w = 1 / sum p_k(x)^2,
    // which keeps full relative accuracy in the tails.
    for (Eigen::Index i = 0; i < N; ++i) {
        double x = nodes(i);
        double sum_sq = 0.0;
        for (int iter = 0; iter < 3; ++iter) {
            double p_prev = 0.0, p = 1.0;  // p_0 = 1 (orthonormal w.r.t. gamma)
            double dp_prev = 0.0, dp = 0.0;
            sum_sq = 1.0;
            for (Eigen::Index k = 1; k <= N; ++k) {
                const double sk = std::sqrt(static_cast<double>(k));
                const double skm1 = std::sqrt(static_cast<double>(k - 1));
                const double p_next = (x * p - skm1 * p_prev) / sk;
                const double dp_next = (p + x * dp - skm1 * dp_prev) / sk;
                p_prev = p;
                p = p_next;
                dp_prev = dp;
                dp = dp_next;
                if (k < N) sum_sq += p * p;
            }
            if (dp != 0.0) x -= p / dp;
        }
        nodes(i) = x;
        // Recompute sum of squares at the polished node.
        double p_prev = 0.0, p = 1.0;
        sum_sq = 1.0;
        for (Eigen::Index k = 1; k < N; ++k) {
            const double p_next = (x * p - std::sqrt(static_cast<double>(k - 1)) * p_prev) / std::sqrt(static_cast<double>(k));
            p_prev = p;
            p = p_next;
            sum_sq += p * p;
        }
        weights(i) = 1.0 / sum_sq;
    }
    // Symmetrize: the rule is exactly symmetric about zero.
    for (Eigen::Index i = 0; i < N / 2; ++i) {
        const Eigen::Index j = N - 1 - i;
        const double x = 0.5 * (nodes(j) - nodes(i));
        nodes(i) = -x;
        nodes(j) = x;
        const double w = 0.5 * (weights(i) + weights(j));
        weights(i) = w;
        weights(j) = w;
    }
    if (N % 2 == 1) nodes(N / 2) = 0.0;
    weights /= weights.sum();
}

QuadratureRule QuadratureRule::gauss_hermite(std::size_t dim, std::size_t points_per_axis) {
    QuadratureRule r;
    r.kind_ = QuadratureKind::GaussHermite;
    r.dim_ = dim;
    r.points_per_axis_ = points_per_axis;
    Vec x, w;
    gauss_hermite_1d(points_per_axis, x, w);
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) {
        total *= points_per_axis;
        if (total > 50'000'000) throw QuadratureError("tensor Gauss-Hermite rule too large; use Monte Carlo");
    }
    r.nodes_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(dim));
    r.weights_.resize(static_cast<Eigen::Index>(total));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        double weight = 1.0;
        for (std::size_t axis = 0; axis < dim; ++axis) {
            const auto k = static_cast<Eigen::Index>(rem % points_per_axis);
            rem /= points_per_axis;
            r.nodes_(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(axis)) = x(k);
            weight *= w(k);
        }
        r.weights_(static_cast<Eigen::Index>(idx)) = weight;
    }
    if (dim == 0) {
        r.nodes_.resize(1, 0);
        r.weights_ = Vec::Ones(1);
    }
    r.weights_ /= r.weights_.sum();
    return r;
}

QuadratureRule QuadratureRule::monte_carlo(std::size_t dim, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw QuadratureError("Monte-Carlo rule needs at least one sample");
    QuadratureRule r;
    r.kind_ = QuadratureKind::MonteCarlo;
    r.dim_ = dim;
    r.seed_ = seed;
    const std::size_t half = (samples + 1) / 2;
    r.nodes_.resize(static_cast<Eigen::Index>(2 * half), static_cast<Eigen::Index>(dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (std::size_t k = 0; k < half; ++k)
        for (std::size_t a = 0; a < dim; ++a) {
            const double z = gauss(rng);
            r.nodes_(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(a)) = z;
            r.nodes_(static_cast<Eigen::Index>(2 * k + 1), static_cast<Eigen::Index>(a)) = -z;
        }
    r.weights_ = Vec::Constant(static_cast<Eigen::Index>(2 * half), 1.0 / static_cast<double>(2 * half));
    return r;
}

QuadratureRule QuadratureRule::default_for(std::size_t dim, std::size_t pieces, std::uint64_t seed) {
    if (dim == 1) return gauss_hermite(1, 64);
    if (dim <= 3 && pieces <= 50) return gauss_hermite(dim, 20);
    return monte_carlo(dim, 100000, seed);
}

QuadratureRule QuadratureRule::parse(const std::string& spec, std::size_t dim) {
    std::istringstream in(spec);
    std::string kind, a, b, extra;
    std::getline(in, kind, ':');
    std::getline(in, a, ':');
    std::getline(in, b, ':');
    std::getline(in, extra);
    auto number = [](const std::string& text, std::uint64_t& value) {
        const char* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, value);
        return !text.empty() && ec == std::errc() && ptr == end;
    };
    std::uint64_t n = 0, seed = 0;
    if (extra.empty() && number(a, n) && n > 0) {
        if (kind == "gh" && b.empty()) return gauss_hermite(dim, static_cast<std::size_t>(n));
        if (kind == "mc" && number(b, seed)) return monte_carlo(dim, static_cast<std::size_t>(n), seed);
    }
    throw QuadratureError("invalid quadrature spec '" + spec + "' (expected gh:<n> or mc:<samples>:<seed>)");
}

std::string QuadratureRule::describe() const {
    std::ostringstream out;
    if (kind_ == QuadratureKind::GaussHermite) out << "gh:" << points_per_axis_;
    else out << "mc:" << size() << ":" << seed_;
    return out.str();
}

QuadratureRule QuadratureRule::drop_leading_axis() const {
    if (dim_ == 0) throw QuadratureError("cannot drop an axis of a zero-dimensional rule");
    if (kind_ == QuadratureKind::GaussHermite) {
        QuadratureRule r = gauss_hermite(dim_ - 1, points_per_axis_);
        return r;
    }
    QuadratureRule r = *this;
    r.dim_ = dim_ - 1;
    if (r.dim_ == 0) {
        r.nodes_.resize(1, 0);
        r.weights_ = Vec::Ones(1);
    } else {
        r.nodes_ = nodes_.rightCols(static_cast<Eigen::Index>(dim_ - 1));
    }
    return r;
}

QuadratureRule QuadratureRule::with_dim(std::size_t k) const {
    if (k > dim_) throw QuadratureError("cannot raise the dimension of a rule");
    if (kind_ == QuadratureKind::GaussHermite) return gauss_hermite(k, points_per_axis_);
    QuadratureRule r = *this;
    r.dim_ = k;
    if (k == 0) {
        r.nodes_.resize(1, 0);
        r.weights_ = Vec::Ones(1);
    } else {
        r.nodes_ = nodes_.leftCols(static_cast<Eigen::Index>(k));
    }
    return r;
}

}  // namespace bassmt
