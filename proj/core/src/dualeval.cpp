#include "bassmt/dualeval.hpp"

#include <cmath>
#include <limits>

#include "bassmt/errors.hpp"

namespace bassmt {

bool is_infinite_value(double value) { return std::isinf(value) && value > 0.0; }

double phi_psi(const MaxAffine& v, const Vec& x, const QuadratureRule& rule) {
    if (static_cast<std::size_t>(x.size()) != v.dim()) throw DimensionError("point dimension mismatch");
    if (rule.dim() != v.dim()) throw QuadratureError("quadrature dimension does not match the function");
    if (!v.slopes_affinely_span()) {
        // dom psi is a lower-dimensional polytope: work in its affine hull.
        const AffineHull hull = affine_hull(v.slopes());
        const double scale = 1.0 + v.slopes().cwiseAbs().maxCoeff();
        if (hull.distance(x) > 1e-9 * scale) throw OutOfRangeError("target is outside the affine hull of dom psi");
        if (hull.rank() == 0) return v.intercepts()(0);
        return phi_psi(reduce_to_hull(v, hull), hull.coordinates(x), rule.with_dim(hull.rank()));
    }
    const GaussianCellIntegrator integ(v, rule);
    InverseOptions opt;
    opt.tol = 1e-12;
    const Vec zeta = smoothed_grad_inverse(integ, x, opt);
    return zeta.dot(x) - integ.integrate(zeta).value;
}

double phi_psi(const AnalyticConvex& v, const Vec& x, const QuadratureRule& rule) {
    const Vec zeta = smoothed_grad_inverse(v, x, rule, 1e-12);
    return zeta.dot(x) - gaussian_smooth(v, 1.0, rule, zeta).value;
}

namespace {

template <class Potential, class Conjugate>
double dual_value_impl(const Potential& v, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       const QuadratureRule& rule, Conjugate&& conj) {
    if (mu.dim() != nu.dim()) throw DimensionError("measures have different dimensions");
    double acc = 0.0;
    for (std::size_t j = 0; j < nu.size(); ++j) {
        const double psi = conj(nu.atom(j));
        if (is_infinite_value(psi)) return std::numeric_limits<double>::infinity();
        acc += nu.weight(j) * psi;
    }
    for (std::size_t i = 0; i < mu.size(); ++i) acc -= mu.weight(i) * phi_psi(v, mu.atom(i), rule);
    return acc;
}

template <class Potential, class Conjugate>
double relaxed_dual_impl(const Potential& v, const DiscreteMeasure& mu, const Mat& targets, const Mat& kernels,
                         const QuadratureRule& rule, Conjugate&& conj) {
    if (kernels.rows() != static_cast<Eigen::Index>(mu.size()) || kernels.cols() != targets.rows())
        throw DimensionError("kernel matrix shape does not match the marginals");
    Vec psi(targets.rows());
    for (Eigen::Index j = 0; j < targets.rows(); ++j) psi(j) = conj(Vec(targets.row(j).transpose()));
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double expected_psi = 0.0;
        for (Eigen::Index j = 0; j < targets.rows(); ++j) {
            const double w = kernels(ii, j);
            if (w <= 0.0) continue;
            if (is_infinite_value(psi(j))) return std::numeric_limits<double>::infinity();
            expected_psi += w * psi(j);
        }
        acc += mu.weight(i) * (expected_psi - phi_psi(v, mu.atom(i), rule));
    }
    return acc;
}

Mat row_normalized(const MartingaleCoupling& pi) {
    Mat k = pi.matrix;
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        const double s = k.row(i).sum();
        if (s > 0.0) k.row(i) /= s;
    }
    return k;
}

std::function<double(const Vec&)> analytic_conjugate(const AnalyticConvex& v) {
    if (!v.conjugate) throw QuadratureError("analytic potential has no closed-form conjugate");
    return v.conjugate;
}

}  // namespace

double dual_value(const MaxAffine& v, const DiscreteMeasure& mu, const DiscreteMeasure& nu, const QuadratureRule& rule) {
    return dual_value_impl(v, mu, nu, rule, [&](const Vec& y) { return conjugate_at(v, y); });
}

double dual_value(const AnalyticConvex& v, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const QuadratureRule& rule) {
    return dual_value_impl(v, mu, nu, rule, analytic_conjugate(v));
}

double relaxed_dual(const MaxAffine& v, const DiscreteMeasure& mu, const Mat& targets, const Mat& kernels,
                    const QuadratureRule& rule) {
    return relaxed_dual_impl(v, mu, targets, kernels, rule, [&](const Vec& y) { return conjugate_at(v, y); });
}

double relaxed_dual(const MaxAffine& v, const MartingaleCoupling& pi, const QuadratureRule& rule) {
    return relaxed_dual(v, pi.source, pi.target.atoms(), row_normalized(pi), rule);
}

double relaxed_dual(const AnalyticConvex& v, const MartingaleCoupling& pi, const QuadratureRule& rule) {
    return relaxed_dual_impl(v, pi.source, pi.target.atoms(), row_normalized(pi), rule, analytic_conjugate(v));
}

double rho_psi(const MaxAffine& v, const QuadratureRule& rule) {
    const GaussianCellIntegrator integ(v, rule);
    return integ.integrate(Vec::Zero(static_cast<Eigen::Index>(v.dim()))).value;
}

double rho_psi(const AnalyticConvex& v, const QuadratureRule& rule) {
    return gaussian_smooth(v, 1.0, rule, Vec::Zero(static_cast<Eigen::Index>(v.dim))).value;
}

}  // namespace bassmt
