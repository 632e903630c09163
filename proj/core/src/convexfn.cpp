#include "bassmt/convexfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "bassmt/errors.hpp"
#include "bassmt/lp.hpp"

namespace bassmt {

MaxAffine::MaxAffine(Mat slopes, Vec intercepts) : slopes_(std::move(slopes)), intercepts_(std::move(intercepts)) {
    if (slopes_.rows() == 0) throw InvalidMeasureError("max-affine function needs at least one piece");
    if (slopes_.cols() == 0) throw DimensionError("max-affine function needs positive dimension");
    if (slopes_.rows() != intercepts_.size()) throw DimensionError("slope and intercept counts differ");
    if (!slopes_.allFinite() || !intercepts_.allFinite()) throw InvalidMeasureError("max-affine data must be finite");
    for (Eigen::Index i = 0; i < slopes_.rows(); ++i)
        for (Eigen::Index j = i + 1; j < slopes_.rows(); ++j)
            if (slopes_.row(i) == slopes_.row(j)) throw InvalidMeasureError("max-affine slopes must be pairwise distinct");
}

double MaxAffine::value(const Vec& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) throw DimensionError("point dimension mismatch");
    return (slopes_ * x - intercepts_).maxCoeff();
}

std::size_t MaxAffine::active_piece(const Vec& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) throw DimensionError("point dimension mismatch");
    const Vec vals = slopes_ * x - intercepts_;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < vals.size(); ++j)
        if (vals(j) > vals(best)) best = j;
    return static_cast<std::size_t>(best);
}

MaxAffine MaxAffine::with_intercepts(Vec intercepts) const {
    MaxAffine out = *this;
    if (intercepts.size() != intercepts_.size()) throw DimensionError("intercept count mismatch");
    out.intercepts_ = std::move(intercepts);
    return out;
}

bool MaxAffine::slopes_affinely_span() const {
    if (pieces() < dim() + 1) return false;
    const Mat centered = slopes_.rowwise() - slopes_.row(0);
    Eigen::ColPivHouseholderQR<Mat> qr(centered);
    qr.setThreshold(1e-10);
    return static_cast<std::size_t>(qr.rank()) == dim();
}

AffineHull affine_hull(const Mat& points, double tol) {
    if (points.rows() == 0) throw InvalidMeasureError("affine hull of an empty point set");
    AffineHull h;
    h.origin = points.colwise().mean().transpose();
    const Mat centered = points.rowwise() - h.origin.transpose();
    Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    const double scale = std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > tol * scale) ++rank;
    h.basis = svd.matrixV().leftCols(rank);
    return h;
}

MaxAffine reduce_to_hull(const MaxAffine& v, const AffineHull& hull) {
    const Mat reduced = (v.slopes().rowwise() - hull.origin.transpose()) * hull.basis;
    return MaxAffine(reduced, v.intercepts());
}

Vec eval_subgradient(const MaxAffine& v, const Vec& x) { return v.slope(v.active_piece(x)); }

double conjugate_at(const MaxAffine& v, const Vec& y) {
    if (static_cast<std::size_t>(y.size()) != v.dim()) throw DimensionError("point dimension mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double scale = 1.0 + v.slopes().cwiseAbs().maxCoeff();
    if (v.dim() == 1) {
        // Lower convex envelope of the points (a_j, c_j).
        std::vector<std::pair<double, double>> pts;
        for (std::size_t j = 0; j < v.pieces(); ++j)
            pts.emplace_back(v.slopes()(static_cast<Eigen::Index>(j), 0), v.intercepts()(static_cast<Eigen::Index>(j)));
        std::sort(pts.begin(), pts.end());
        const double yy = y(0);
        if (yy < pts.front().first - 1e-12 * scale || yy > pts.back().first + 1e-12 * scale) return inf;
        std::vector<std::pair<double, double>> hull;
        for (const auto& p : pts) {
            while (hull.size() >= 2) {
                const auto& a = hull[hull.size() - 2];
                const auto& b = hull.back();
                const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
                if (cross <= 0.0) hull.pop_back();
                else break;
            }
            hull.push_back(p);
        }
        if (yy <= hull.front().first) return hull.front().second;
        if (yy >= hull.back().first) return hull.back().second;
        for (std::size_t k = 1; k < hull.size(); ++k) {
            if (yy <= hull[k].first) {
                const auto& a = hull[k - 1];
                const auto& b = hull[k];
                const double lam = (yy - a.first) / (b.first - a.first);
                return (1.0 - lam) * a.second + lam * b.second;
            }
        }
        return hull.back().second;
    }
    const auto J = static_cast<Eigen::Index>(v.pieces());
    const auto d = static_cast<Eigen::Index>(v.dim());
    lp::LinearProgram p;
    p.A.resize(d + 1, J);
    p.A.topRows(d) = v.slopes().transpose();
    p.A.row(d).setOnes();
    p.b.resize(d + 1);
    p.b.head(d) = y;
    p.b(d) = 1.0;
    p.c = v.intercepts();
    const auto res = lp::solve(p);
    if (res.status != lp::Status::Optimal) return inf;
    return res.objective;
}

double MonotoneProfile::derivative(double x) const {
    if (z.size() < 2 || z.size() != slope.size()) throw InvalidMeasureError("profile needs at least two grid points");
    std::size_t k;
    if (x <= z.front()) k = 0;
    else if (x >= z.back()) k = z.size() - 2;
    else k = static_cast<std::size_t>(std::upper_bound(z.begin(), z.end(), x) - z.begin()) - 1;
    const double lam = (x - z[k]) / (z[k + 1] - z[k]);
    return slope[k] + lam * (slope[k + 1] - slope[k]);
}

double MonotoneProfile::primitive(double x) const {
    if (z.size() < 2 || z.size() != slope.size()) throw InvalidMeasureError("profile needs at least two grid points");
    // Exact integral of the piecewise-linear derivative from z.front().
    auto seg = [&](double a, double b) { return 0.5 * (derivative(a) + derivative(b)) * (b - a); };
    if (x <= z.front()) return -seg(x, z.front());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < z.size(); ++k) {
        if (x <= z[k + 1]) return acc + seg(z[k], x);
        acc += seg(z[k], z[k + 1]);
    }
    return acc + seg(z.back(), x);
}

AnalyticConvex AnalyticConvex::quadratic(std::size_t dim) {
    AnalyticConvex f;
    f.dim = dim;
    f.value = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
    f.gradient = [](const Vec& x) { return x; };
    f.conjugate = [](const Vec& y) { return 0.5 * y.squaredNorm(); };
    f.smoothed = [dim](const Vec& x, double t) {
        return SmoothedValue{0.5 * (x.squaredNorm() + static_cast<double>(dim) * t), x};
    };
    return f;
}

AnalyticConvex AnalyticConvex::arctan_potential() {
    AnalyticConvex f;
    f.dim = 1;
    f.value = [](const Vec& x) { return x(0) * std::atan(x(0)) - 0.5 * std::log1p(x(0) * x(0)); };
    f.gradient = [](const Vec& x) { return Vec::Constant(1, std::atan(x(0))); };
    f.conjugate = [](const Vec& y) {
        if (std::abs(y(0)) >= 0.5 * std::numbers::pi) return std::numeric_limits<double>::infinity();
        return -std::log(std::cos(y(0)));
    };
    f.gradient_bound = 0.5 * std::numbers::pi;
    return f;
}

namespace {

// I_nu(z) exp(-z) for z >= 0.
double scaled_bessel_i(double nu, double z) {
    if (z < 600.0) return boost::math::cyl_bessel_i(nu, z) * std::exp(-z);
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 8; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * k * z);
        sum += term;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * z);
}

// Smoothing of x |-> h(|x|) in closed form up to one radial integral:
// R = |x + sqrt(t) Z| is noncentral chi and E[cos angle(x, x + sqrt(t) Z) | R]
// is a ratio of Bessel functions. h' may jump at `kink`.
SmoothedValue radial_smoothing(const std::function<double(double)>& h, const std::function<double(double)>& dh,
                               double kink, const Vec& x, double t) {
    const double st = std::sqrt(t);
    const auto d = static_cast<double>(x.size());
    const double half = 0.5 * d;
    const double rho = x.norm();
    const double a = rho / st;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

    std::vector<double> cuts{std::max(0.0, a - 12.0)};
    const double xk = kink / st;
    const double top = a + std::sqrt(d) + 12.0;
    if (xk > cuts[0] && xk < top) cuts.push_back(xk);
    cuts.push_back(top);
    auto integrate = [&](const std::function<double(double)>& f) {
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += GK::integrate(f, cuts[i], cuts[i + 1], 10, 1e-11);
        return total;
    };

    SmoothedValue out{0.0, Vec::Zero(x.size())};
    if (a < 1e-8) {
        const double norm = std::exp((half - 1.0) * std::log(2.0) + boost::math::lgamma(half));
        out.value = integrate([&](double r) { return h(st * r) * std::pow(r, d - 1.0) * std::exp(-0.5 * r * r) / norm; });
        return out;
    }
    auto radial = [&](double r, double order) {
        const double power = half == 1.0 ? 1.0 : std::pow(r / a, half - 1.0);
        return r * power * std::exp(-0.5 * (r - a) * (r - a)) * scaled_bessel_i(order, a * r);
    };
    out.value = integrate([&](double r) { return h(st * r) * radial(r, half - 1.0); });
    const double along = integrate([&](double r) { return dh(st * r) * radial(r, half); });
    out.gradient = along / rho * x;
    return out;
}

}  // namespace

AnalyticConvex AnalyticConvex::radial_two_slope(std::size_t dim, double inner, double outer, double kink) {
    AnalyticConvex f;
    f.dim = dim;
    f.value = [=](const Vec& x) {
        const double r = x.norm();
        return r <= kink ? inner * r : inner * kink + outer * (r - kink);
    };
    f.gradient = [=](const Vec& x) -> Vec {
        const double r = x.norm();
        if (r == 0.0) return Vec::Zero(x.size());
        return (r < kink ? inner : outer) / r * x;
    };
    f.gradient_bound = std::max(std::abs(inner), std::abs(outer));
    f.smoothed = [=](const Vec& x, double t) {
        const auto h = [=](double r) { return r <= kink ? inner * r : inner * kink + outer * (r - kink); };
        const auto dh = [=](double r) { return r < kink ? inner : outer; };
        return radial_smoothing(h, dh, kink, x, t);
    };
    return f;
}

AnalyticConvex AnalyticConvex::from_profile(MonotoneProfile profile) {
    AnalyticConvex f;
    f.dim = 1;
    auto shared = std::make_shared<MonotoneProfile>(std::move(profile));
    f.value = [shared](const Vec& x) { return shared->primitive(x(0)); };
    f.gradient = [shared](const Vec& x) { return Vec::Constant(1, shared->derivative(x(0))); };
    return f;
}

SmoothedValue gaussian_smooth(const MaxAffine& f, double t, const QuadratureRule& rule, const Vec& x) {
    if (!(t > 0.0)) throw QuadratureError("smoothing variance must be positive");
    if (rule.dim() != f.dim()) throw QuadratureError("quadrature dimension does not match the function");
    const GaussianCellIntegrator integ(f, rule);
    const auto s = integ.integrate(x, t);
    return SmoothedValue{s.value, s.gradient};
}

SmoothedValue gaussian_smooth(const AnalyticConvex& f, double t, const QuadratureRule& rule, const Vec& x) {
    if (!(t > 0.0)) throw QuadratureError("smoothing variance must be positive");
    if (rule.dim() != f.dim) throw QuadratureError("quadrature dimension does not match the function");
    if (static_cast<std::size_t>(x.size()) != f.dim) throw DimensionError("point dimension mismatch");
    if (f.smoothed) return f.smoothed(x, t);
    const double s = std::sqrt(t);
    SmoothedValue out{0.0, Vec::Zero(x.size())};
    for (std::size_t k = 0; k < rule.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Vec p = x + s * rule.nodes().row(kk).transpose();
        const double w = rule.weights()(kk);
        out.value += w * f.value(p);
        out.gradient += w * f.gradient(p);
    }
    return out;
}

Vec invert_smoothed_gradient(const std::function<SmoothedValue(const Vec&)>& eval, const Vec& x,
                             const InverseOptions& options) {
    const auto d = x.size();
    const double bound = 50.0 * (1.0 + x.norm());
    Vec zeta = options.start ? *options.start : x;
    if (zeta.size() != d) throw DimensionError("start point dimension mismatch");

    auto objective = [&](const Vec& z, const SmoothedValue& s) { return z.dot(x) - s.value; };
    SmoothedValue cur = eval(zeta);
    Vec r = x - cur.gradient;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        if (r.norm() <= options.tol) return zeta;

        Mat hess(d, d);
        for (Eigen::Index k = 0; k < d; ++k) {
            const double h = 1e-5 * std::sqrt(options.t) * std::max(1.0, std::abs(zeta(k)));
            Vec zp = zeta, zm = zeta;
            zp(k) += h;
            zm(k) -= h;
            hess.col(k) = (eval(zp).gradient - eval(zm).gradient) / (2.0 * h);
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        hess.diagonal().array() += 1e-14 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());

        Vec step;
        Eigen::LDLT<Mat> ldlt(hess);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(r);
        if (step.size() != d || !step.allFinite()) step = r;

        const double f0 = objective(zeta, cur);
        const double slope = r.dot(step);
        double lam = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Vec trial = zeta + lam * step;
            if (trial.norm() > bound) {
                lam *= 0.5;
                continue;
            }
            const SmoothedValue s = eval(trial);
            const Vec r_trial = x - s.gradient;
            if (objective(trial, s) >= f0 + 1e-4 * lam * slope || r_trial.norm() < r.norm()) {
                zeta = trial;
                cur = s;
                r = r_trial;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if (!accepted) {
            // Take the full step anyway; divergence is caught by the bound.
            zeta += step;
            if (zeta.norm() > bound || !zeta.allFinite())
                throw OutOfRangeError("target is outside the interior of the smoothed-gradient range");
            cur = eval(zeta);
            r = x - cur.gradient;
        }
    }
    if (r.norm() <= options.tol) return zeta;
    if (zeta.norm() > 0.25 * bound)
        throw OutOfRangeError("target is outside the interior of the smoothed-gradient range");
    throw ConvergenceError("smoothed-gradient inversion did not reach the requested tolerance");
}

Vec smoothed_grad_inverse(const GaussianCellIntegrator& integ, const Vec& x, const InverseOptions& options) {
    const MaxAffine& v = integ.potential();
    if (static_cast<std::size_t>(x.size()) != v.dim()) throw DimensionError("target dimension mismatch");
    if (!v.slopes_affinely_span()) throw RankError("slopes do not affinely span the space");
    const double scale = 1.0 + v.slopes().cwiseAbs().maxCoeff();
    if (v.dim() == 1) {
        if (x(0) <= v.slopes().col(0).minCoeff() + 1e-14 * scale || x(0) >= v.slopes().col(0).maxCoeff() - 1e-14 * scale)
            throw OutOfRangeError("target is outside the open interval spanned by the slopes");
    } else if (!std::isfinite(conjugate_at(v, x))) {
        throw OutOfRangeError("target is outside the convex hull of the slopes");
    }
    const double t = options.t;
    return invert_smoothed_gradient(
        [&](const Vec& z) {
            const auto s = integ.integrate(z, t);
            return SmoothedValue{s.value, s.gradient};
        },
        x, options);
}

Vec smoothed_grad_inverse(const MaxAffine& v, const Vec& x, const QuadratureRule& rule, double tol) {
    if (rule.dim() != v.dim()) throw QuadratureError("quadrature dimension does not match the function");
    const GaussianCellIntegrator integ(v, rule);
    InverseOptions opt;
    opt.tol = tol;
    return smoothed_grad_inverse(integ, x, opt);
}

Vec smoothed_grad_inverse(const AnalyticConvex& v, const Vec& x, const QuadratureRule& rule, double tol,
                          const InverseOptions& options) {
    if (rule.dim() != v.dim) throw QuadratureError("quadrature dimension does not match the function");
    InverseOptions opt = options;
    opt.tol = tol;
    return invert_smoothed_gradient([&](const Vec& z) { return gaussian_smooth(v, opt.t, rule, z); }, x, opt);
}

}  // namespace bassmt
