#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "bassmt/quadrature.hpp"
#include "bassmt/types.hpp"

namespace bassmt {

// Convex function v(x) = max_j (<a_j, x> - c_j).
//
// The Bass potential lives here with slopes a_j equal to the target atoms;
// its Legendre conjugate v* (evaluated by conjugate_at) is the dual
// potential, finite exactly on conv{a_j}.
class MaxAffine {
public:
    MaxAffine() = default;
    // `slopes` is pieces x dim. Slopes must be pairwise distinct.
    MaxAffine(Mat slopes, Vec intercepts);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(slopes_.cols()); }
    std::size_t pieces() const noexcept { return static_cast<std::size_t>(slopes_.rows()); }
    const Mat& slopes() const noexcept { return slopes_; }
    const Vec& intercepts() const noexcept { return intercepts_; }
    Vec slope(std::size_t j) const { return slopes_.row(static_cast<Eigen::Index>(j)).transpose(); }

    double value(const Vec& x) const;
    // Lowest-index maximizer of <a_j, x> - c_j.
    std::size_t active_piece(const Vec& x) const;

    MaxAffine with_intercepts(Vec intercepts) const;
    // True when {a_j} affinely spans R^dim.
    bool slopes_affinely_span() const;

private:
    Mat slopes_;
    Vec intercepts_;
};

// Result of a Gaussian smoothing query: (f * gamma^t)(x) and its gradient.
struct SmoothedValue {
    double value = 0.0;
    Vec gradient;
};

// Non-decreasing one-dimensional derivative profile v' given on a grid,
// interpolated linearly and extrapolated linearly from the end segments.
struct MonotoneProfile {
    std::vector<double> z;
    std::vector<double> slope;

    double derivative(double x) const;
    // Antiderivative with value 0 at z.front().
    double primitive(double x) const;
};

// Closed-form convex test potential given by evaluation and gradient maps,
// with optional closed-form conjugate and Gaussian smoothing.
struct AnalyticConvex {
    std::size_t dim = 1;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<double(const Vec&)> conjugate;
    std::function<SmoothedValue(const Vec&, double)> smoothed;
    // sup |grad f| when finite; the gradient range is then bounded.
    std::optional<double> gradient_bound;

    // x |-> |x|^2 / 2.
    static AnalyticConvex quadratic(std::size_t dim);
    // z |-> z arctan z - log(1 + z^2) / 2, derivative arctan.
    static AnalyticConvex arctan_potential();
    // x |-> h(|x|) with h piecewise affine, slope `inner` on [0, kink],
    // slope `outer` beyond and h(0) = 0.
    static AnalyticConvex radial_two_slope(std::size_t dim, double inner, double outer, double kink);
    static AnalyticConvex from_profile(MonotoneProfile profile);
};

// Affine hull {origin + basis w} of a point cloud; `basis` is dim x rank with
// orthonormal columns.
struct AffineHull {
    Vec origin;
    Mat basis;

    std::size_t rank() const noexcept { return static_cast<std::size_t>(basis.cols()); }
    // Coordinates of x in the hull frame and the distance of x to the hull.
    Vec coordinates(const Vec& x) const { return basis.transpose() * (x - origin); }
    double distance(const Vec& x) const { return (x - origin - basis * coordinates(x)).norm(); }
};

AffineHull affine_hull(const Mat& points, double tol = 1e-10);

// v restricted to the hull frame of its slopes: v(z) = <origin, z> +
// reduced(basis' z). Requires `hull` to be the affine hull of v's slopes.
MaxAffine reduce_to_hull(const MaxAffine& v, const AffineHull& hull);

// Legendre conjugate v*(y) = min { sum l_j c_j : sum l_j a_j = y, l in simplex };
// +infinity outside conv{a_j}.
double conjugate_at(const MaxAffine& v, const Vec& y);

// Slope of the lowest-index active piece at x.
Vec eval_subgradient(const MaxAffine& v, const Vec& x);

// Exact-along-a-line Gaussian integration of a max-affine function.
//
// Integrals against gamma^t are split as Z = u S + P W with u a fixed
// generic unit direction (no two slopes share <a_j, u>), S ~ N(0, 1) and W ~
// N(0, I_{d-1}). The S integral is done in closed form from the breakpoints
// of the upper envelope along the line; W is integrated with the rule
// obtained by dropping one axis of the supplied rule. In dim 1 this is exact.
// In dim 2 with a Gauss-Hermite rule of n points per axis (and at most 64
// pieces) W is instead integrated piecewise between the projections of the
// envelope's vertices with n-point Gauss-Legendre, which converges
// geometrically because the integrand is smooth between those kinks.
// The resulting smoothed gradient is continuous in the base point, which the
// Newton inversion of the smoothed gradient relies on.
class GaussianCellIntegrator {
public:
    struct Stats {
        double value = 0.0;  // (v * gamma^t)(zeta)
        Vec gradient;        // (grad v * gamma^t)(zeta) = sum_j m_j a_j
        Vec masses;          // m_j = gamma^t_zeta(cell j)
        double mcov = 0.0;   // E < grad v(zeta + sqrt(t) Z), Z >
    };

    GaussianCellIntegrator(const MaxAffine& v, const QuadratureRule& rule);

    Stats integrate(const Vec& zeta, double t = 1.0) const;

    // Replaces the intercepts; the slopes and hence the direction are kept.
    void set_intercepts(const Vec& intercepts);

    const MaxAffine& potential() const noexcept { return v_; }
    const Vec& direction() const noexcept { return u_; }

private:
    MaxAffine v_;
    Vec u_;
    Mat perp_;  // dim x (dim - 1)
    QuadratureRule perp_rule_;
    Vec sigma_;  // <a_j, u>
    std::vector<std::size_t> order_;
    double sigma_tie_;
    bool piecewise_ = false;
    Vec legendre_nodes_;
    Vec legendre_weights_;
    Vec vertex_offsets_;  // <perp, vertex> for every envelope vertex (dim 2)

    void find_vertices();
    template <class Visit>
    void perpendicular_nodes(const Vec& zeta, double s, Visit&& visit) const;
};

SmoothedValue gaussian_smooth(const MaxAffine& f, double t, const QuadratureRule& rule, const Vec& x);
SmoothedValue gaussian_smooth(const AnalyticConvex& f, double t, const QuadratureRule& rule, const Vec& x);

struct InverseOptions {
    double tol = 1e-10;
    double t = 1.0;
    std::size_t max_iterations = 60;
    std::optional<Vec> start;
};

// Solves (grad v * gamma^t)(zeta) = x by damped Newton on the strictly
// concave map zeta |-> <zeta, x> - (v * gamma^t)(zeta), Hessian from central
// differences of the smoothed gradient. Throws OutOfRangeError when x is not
// in the interior of the range (iterates leave |zeta| <= 50 (1 + |x|)) and
// RankError when the slopes of v do not affinely span.
Vec smoothed_grad_inverse(const MaxAffine& v, const Vec& x, const QuadratureRule& rule, double tol);
Vec smoothed_grad_inverse(const GaussianCellIntegrator& integ, const Vec& x, const InverseOptions& options);
Vec smoothed_grad_inverse(const AnalyticConvex& v, const Vec& x, const QuadratureRule& rule, double tol,
                          const InverseOptions& options = {});

// Generic inversion driver used by the overloads above: `eval(zeta)` must
// return the smoothed value and gradient.
Vec invert_smoothed_gradient(const std::function<SmoothedValue(const Vec&)>& eval, const Vec& x,
                             const InverseOptions& options);

}  // namespace bassmt
