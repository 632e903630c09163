#include "bassmt/transport.hpp"

#include <cmath>

#include "bassmt/errors.hpp"
#include "bassmt/lp.hpp"

namespace bassmt {

double mcov_1d(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    if (p.dim() != 1 || q.dim() != 1) throw DimensionError("mcov_1d requires one-dimensional measures");
    double s = 0.0;
    for (const auto& pr : comonotone_coupling(p, q)) s += pr.mass * pr.x * pr.y;
    return s;
}

double mcov_discrete(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    if (p.dim() != q.dim()) throw DimensionError("measures have different dimensions");
    const auto n = static_cast<Eigen::Index>(p.size());
    const auto m = static_cast<Eigen::Index>(q.size());
    if (n == 1 || m == 1) return moments(p).barycenter.dot(moments(q).barycenter);
    const Mat inner = p.atoms() * q.atoms().transpose();
    lp::LinearProgram prog;
    prog.A = Mat::Zero(n + m, n * m);
    prog.b.resize(n + m);
    prog.c.resize(n * m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::Index k = i * m + j;
            prog.A(i, k) = 1.0;
            prog.A(n + j, k) = 1.0;
            prog.c(k) = -inner(i, j);
        }
    prog.b.head(n) = p.weights();
    prog.b.tail(m) = q.weights();
    const auto res = lp::solve(prog);
    if (res.status != lp::Status::Optimal) throw InfeasibleError("transportation LP failed");
    return -res.objective;
}

CellMassVector gaussian_cell_masses(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule,
                                    CellMassMethod method) {
    if (rule.dim() != v.dim()) throw QuadratureError("quadrature dimension does not match the function");
    if (static_cast<std::size_t>(zeta.size()) != v.dim()) throw DimensionError("point dimension mismatch");
    if (method == CellMassMethod::LineExact) {
        const GaussianCellIntegrator integ(v, rule);
        return CellMassVector{integ.integrate(zeta).masses};
    }
    CellMassVector out{Vec::Zero(static_cast<Eigen::Index>(v.pieces()))};
    for (std::size_t k = 0; k < rule.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Vec p = zeta + rule.nodes().row(kk).transpose();
        out.masses(static_cast<Eigen::Index>(v.active_piece(p))) += rule.weights()(kk);
    }
    return out;
}

Vec cell_mass_standard_errors(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule) {
    const auto J = static_cast<Eigen::Index>(v.pieces());
    if (rule.kind() != QuadratureKind::MonteCarlo) return Vec::Zero(J);
    if (rule.dim() != v.dim()) throw QuadratureError("quadrature dimension does not match the function");
    // Nodes come in antithetic pairs (z, -z); the pair means are independent.
    const std::size_t pairs = rule.size() / 2;
    Vec sum = Vec::Zero(J), sum_sq = Vec::Zero(J), pair(J);
    for (std::size_t k = 0; k < pairs; ++k) {
        pair.setZero();
        for (std::size_t h = 0; h < 2; ++h) {
            const Vec p = zeta + rule.nodes().row(static_cast<Eigen::Index>(2 * k + h)).transpose();
            pair(static_cast<Eigen::Index>(v.active_piece(p))) += 0.5;
        }
        sum += pair;
        sum_sq += pair.cwiseProduct(pair);
    }
    const double n = static_cast<double>(pairs);
    const Vec mean = sum / n;
    const Vec var = ((sum_sq / n - mean.cwiseProduct(mean)) * (n / (n - 1.0))).cwiseMax(0.0);
    return (var / n).cwiseSqrt();
}

double mcov_bass_kernel(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule) {
    const GaussianCellIntegrator integ(v, rule);
    return integ.integrate(zeta).mcov;
}

double mcov_bass_kernel(const AnalyticConvex& v, const Vec& zeta, const QuadratureRule& rule) {
    if (rule.dim() != v.dim) throw QuadratureError("quadrature dimension does not match the function");
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Vec z = rule.nodes().row(kk).transpose();
        acc += rule.weights()(kk) * v.gradient(zeta + z).dot(z);
    }
    return acc;
}

}  // namespace bassmt
