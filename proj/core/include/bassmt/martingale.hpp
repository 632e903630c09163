#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bassmt/convexfn.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/quadrature.hpp"
#include "bassmt/solver.hpp"

namespace bassmt {

struct ForwardMarginals {
    DiscreteMeasure mu;  // (grad v * gamma)(alpha)
    DiscreteMeasure nu;  // grad v(alpha * gamma)
};

// For max-affine v, nu sits on the slopes with the alpha-mixture of the cell
// masses. For analytic v, nu is a weighted cloud grad v(a + z_k) over alpha
// atoms a and rule nodes z_k; above 2e6 points the rule nodes are dealt out
// to the alpha atoms in turn instead of using the full product.
ForwardMarginals forward_construct(const MaxAffine& v, const DiscreteMeasure& alpha, const QuadratureRule& rule);
ForwardMarginals forward_construct(const AnalyticConvex& v, const DiscreteMeasure& alpha, const QuadratureRule& rule);

// Rule matching the one a solution was computed with (64-node Gauss-Hermite
// when the solution was exact in dimension one).
QuadratureRule solution_rule(const BassSolution& sol);

// Conditional law of the terminal value given source atom x_index: weights
// are the cell masses of v at zeta_i. Pieces with zero mass are dropped.
DiscreteMeasure kernel(const BassSolution& sol, std::size_t x_index);
DiscreteMeasure kernel(const BassSolution& sol, std::size_t x_index, const QuadratureRule& rule);

// Margin of piece j: the largest delta <= 1 with a_j.z - c_j >= a_k.z - c_k + delta
// for all k != j at some z, or 0 when no such z exists. A positive margin
// means the cell has interior, so every kernel charges slope j, even where
// the mass underflows in double precision.
double cell_margin(const MaxAffine& v, std::size_t j);
Vec cell_margins(const MaxAffine& v);

// Sampled paths of (B_t, M_t) on a uniform grid, M_t = grad v_t(B_t) with
// v_t = v * gamma^{1 - t}.
struct PathEnsemble {
    std::size_t n_paths = 0;
    std::size_t dim = 0;
    std::vector<double> times;
    std::vector<Mat> b;  // b[k] is n_paths x dim at times[k]
    std::vector<Mat> m;
    Vec cross_variation;     // sum_k <dM, dB> per path
    Vec relative_variation;  // sum_k |d(M - B)|^2 per path
    std::vector<std::size_t> alpha_index;
    std::uint64_t seed = 0;
    // False when the gradient range of v is unbounded (no boundary to test).
    bool bounded_range = true;
    // Max-affine v only: smallest kernel cell mass of each path at each grid
    // time t < 1 (n_paths x steps), as computed in double precision. Far-tail
    // masses underflow to zero, so this is a diagnostic, not a proof.
    Mat cell_mass_floor;
    // Max-affine v only: for each piece, the largest margin (capped at 1) by
    // which it beats every other piece at some point. All positive means every
    // cell has interior, hence positive Gaussian mass at any t < 1, and M_t is
    // a strictly positive combination of the slopes.
    Vec cell_margins;

    std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    // Index of the grid time closest to t.
    std::size_t step_at(double t) const;
    // Empirical law of M at grid index k.
    DiscreteMeasure martingale_law(std::size_t k) const;
};

// B_0 ~ alpha by systematic assignment of paths to atoms. The increment
// B_1 - B_0 is Latin-hypercube stratified per coordinate and the interior
// grid is filled with Brownian bridges, so every path is exact in law while
// the terminal empirical law has low discrepancy.
PathEnsemble sample_paths(const BassSolution& sol, std::size_t n_paths, std::size_t n_steps = 64,
                          std::uint64_t seed = 0);
PathEnsemble sample_paths(const MaxAffine& v, const DiscreteMeasure& alpha, const QuadratureRule& rule,
                          std::size_t n_paths, std::size_t n_steps = 64, std::uint64_t seed = 0);
PathEnsemble sample_paths(const AnalyticConvex& v, const DiscreteMeasure& alpha, const QuadratureRule& rule,
                          std::size_t n_paths, std::size_t n_steps = 64, std::uint64_t seed = 0);

struct FunctionalEstimates {
    double p_hat = 0.0;   // mean of sum <dM, dB>
    double mt_hat = 0.0;  // mean of sum |d(M - B)|^2
    // |mt_hat - (d + m2(nu) - m2(mu) - 2 p_hat)|
    double relation_residual = 0.0;
    double p_se = 0.0;
    double mt_se = 0.0;
    double relation_se = 0.0;
};

FunctionalEstimates estimate_functionals(const PathEnsemble& ens, const DiscreteMeasure& mu,
                                         const DiscreteMeasure& nu);

struct BoundaryReport {
    bool pass = false;
    // No finite boundary to test (unbounded gradient range).
    bool vacuous = false;
    // True when interiority was decided by positive cell masses rather than
    // by geometry.
    bool mass_certificate = false;
    // Smallest distance of M_t (t < 1) to the boundary of conv(supp nu);
    // negative when a point is outside. For dim >= 3 this is the LP depth
    // max { s : M_t = sum l_j y_j, sum l_j = 1, l_j >= s }.
    double min_distance = 0.0;
    std::size_t violations = 0;
    std::size_t checked = 0;
    std::string note;
};

BoundaryReport check_boundary(const PathEnsemble& ens, const DiscreteMeasure& nu);

struct DriftTest {
    std::size_t coordinate = 0;
    // -1 for the overall drift M_1 - M_0, otherwise the M_{1/2} bin.
    int bin = -1;
    double statistic = 0.0;  // |mean drift|
    double threshold = 0.0;
    bool pass = false;
};

struct MartingaleReport {
    bool pass = false;
    std::vector<DriftTest> tests;
    // Largest statistic / threshold ratio.
    double worst_ratio = 0.0;
};

// Overall drift at 3 standard errors and conditional drift of M_1 - M_{1/2}
// over 10 equal-count bins of M_{1/2} at 4 standard errors, per coordinate.
MartingaleReport check_martingale(const PathEnsemble& ens);

struct TimeConsistencyReport {
    bool pass = false;
    double max_z = 0.0;
    std::size_t bins = 0;
    std::string note;
};

// Re-solves from the binned law of M_{1/2} to nu (dimension one, discrete nu)
// and compares the new kernels with the empirical law of M_1 in each bin.
TimeConsistencyReport time_consistency_diagnostic(const PathEnsemble& ens, const DiscreteMeasure& nu,
                                                  std::size_t bins = 8, double z_tolerance = 3.0);

}  // namespace bassmt
