#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "bassmt/types.hpp"

namespace bassmt {

// Finitely supported probability measure on R^dim. Atoms keep their first
// occurrence order; duplicates are merged by adding weights and weights are
// normalized to sum to one.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    // `atoms` is n x dim, one atom per row.
    DiscreteMeasure(Mat atoms, Vec weights);

    static DiscreteMeasure dirac(const Vec& point);
    static DiscreteMeasure uniform(Mat atoms);
    // Convenience for one-dimensional measures.
    static DiscreteMeasure on_line(const std::vector<double>& atoms, const std::vector<double>& weights);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(atoms_.cols()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(atoms_.rows()); }
    const Mat& atoms() const noexcept { return atoms_; }
    const Vec& weights() const noexcept { return weights_; }
    Vec atom(std::size_t i) const { return atoms_.row(static_cast<Eigen::Index>(i)).transpose(); }
    double weight(std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }

    // Index of an atom equal to `point` (exact match), if any.
    std::optional<std::size_t> find(const Vec& point) const;

private:
    Mat atoms_;
    Vec weights_;
};

struct Moments {
    Vec barycenter;
    double second_moment = 0.0;
};

Moments moments(const DiscreteMeasure& m);

// Joint weights pi(i, j) >= 0 between `source` and `target` with the
// martingale (barycenter) constraint on every row.
struct MartingaleCoupling {
    DiscreteMeasure source;
    DiscreteMeasure target;
    Mat matrix;

    // Largest violation over row sums, column sums and barycenters.
    double max_residual() const;
    // Conditional law of the target given source atom i.
    DiscreteMeasure row_kernel(std::size_t i) const;
};

// Monotone (quantile) coupling of two measures on the line as a list of
// (x, y, mass) triples.
struct QuantilePair {
    double x;
    double y;
    double mass;
};
std::vector<QuantilePair> comonotone_coupling(const DiscreteMeasure& p, const DiscreteMeasure& q);

double wasserstein2_1d(const DiscreteMeasure& p, const DiscreteMeasure& q);

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kChargeTol = 1e-10;

bool check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
// Strassen feasibility as an explicit LP in any dimension (the generic path).
bool check_convex_order_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
// Potential-function comparison for dim 1: equal means and
// u_mu(k) <= u_nu(k) at every atom k of either measure.
bool check_convex_order_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

using AtomPair = std::pair<std::size_t, std::size_t>;

// A feasible martingale coupling; with `promote` the returned coupling
// maximizes the mass on that (mu-atom, nu-atom) pair.
MartingaleCoupling find_mt_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    std::optional<AtomPair> promote = std::nullopt);

struct IrreducibilityReport {
    bool irreducible = false;
    std::optional<AtomPair> witness;
    // Number of pair LPs actually solved (pairs charged by an earlier
    // solution are skipped).
    std::size_t lp_solves = 0;
};

IrreducibilityReport check_irreducible(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// A measure on the line described by its quantile function u -> F^{-1}(u).
struct QuantileFunction {
    std::function<double(double)> quantile;
};

// CDF of the Gaussian mixture sum_i w_i N(a_i, t), i.e. of alpha * gamma^t.
double mixture_cdf(const DiscreteMeasure& alpha, double z, double t = 1.0);
// Survival function of the same mixture.
double mixture_sf(const DiscreteMeasure& alpha, double z, double t = 1.0);
// Inverse of mixture_cdf; `upper` = true solves sf(z) = p instead, which keeps
// accuracy for levels close to one.
double mixture_quantile(const DiscreteMeasure& alpha, double p, double t = 1.0, bool upper = false);

// Quantile function of g(alpha * gamma) for a non-decreasing map g.
QuantileFunction monotone_pushforward(std::function<double(double)> g, DiscreteMeasure alpha);

// Midpoint-rule discretization u_k = (k + 1/2) / n of a quantile function.
DiscreteMeasure discretize_quantile(const QuantileFunction& q, std::size_t n);

}  // namespace bassmt
