#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "bassmt/types.hpp"

namespace bassmt {

enum class QuadratureKind { GaussHermite, MonteCarlo };

// Discrete approximation of the standard Gaussian gamma on R^dim: integrals
// against gamma^t at x become sum_k w_k f(x + sqrt(t) z_k).
class QuadratureRule {
public:
    // Tensor Gauss-Hermite rule for the standard normal weight with
    // `points_per_axis` nodes along each axis.
    static QuadratureRule gauss_hermite(std::size_t dim, std::size_t points_per_axis);
    // Antithetic Monte-Carlo sample of `samples` standard normal vectors
    // (rounded up to an even count), deterministic given the seed.
    static QuadratureRule monte_carlo(std::size_t dim, std::size_t samples, std::uint64_t seed);
    // Library default: 64-node Gauss-Hermite in dim 1, 20 nodes per axis up
    // to dim 3, otherwise 1e5 Monte-Carlo samples. Many affine pieces also
    // push towards Monte Carlo.
    static QuadratureRule default_for(std::size_t dim, std::size_t pieces = 1, std::uint64_t seed = 0);
    // Parses "gh:<n>" or "mc:<samples>:<seed>".
    static QuadratureRule parse(const std::string& spec, std::size_t dim);

    QuadratureKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    // size() x dim()
    const Mat& nodes() const noexcept { return nodes_; }
    const Vec& weights() const noexcept { return weights_; }
    std::size_t points_per_axis() const noexcept { return points_per_axis_; }
    std::uint64_t seed() const noexcept { return seed_; }
    // Canonical textual description ("gh:64", "mc:100000:7").
    std::string describe() const;

    // Rule for the Gaussian on the remaining dim - 1 coordinates. For Monte
    // Carlo the first coordinate of every sample is dropped; a dim-1 rule
    // yields the single-node rule on R^0.
    QuadratureRule drop_leading_axis() const;
    // Rule of the same family on R^k, k <= dim (Monte Carlo keeps the first
    // k coordinates of every sample).
    QuadratureRule with_dim(std::size_t k) const;

private:
    QuadratureKind kind_ = QuadratureKind::GaussHermite;
    std::size_t dim_ = 0;
    std::size_t points_per_axis_ = 0;
    std::uint64_t seed_ = 0;
    Mat nodes_;
    Vec weights_;
};

// One-dimensional Gauss-Hermite nodes/weights for the standard normal
// density (probabilists' Hermite polynomials), weights summing to one.
void gauss_hermite_1d(std::size_t n, Vec& nodes, Vec& weights);

}  // namespace bassmt
