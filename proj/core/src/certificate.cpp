#include <algorithm>
#include <cmath>

#include "bassmt/parallel.hpp"
#include "bassmt/solver.hpp"
#include "bassmt/transport.hpp"

namespace bassmt {

namespace {

QuadratureRule coarser(const QuadratureRule& rule) {
    if (rule.kind() == QuadratureKind::GaussHermite)
        return QuadratureRule::gauss_hermite(rule.dim(), std::max<std::size_t>(2, rule.points_per_axis() / 2));
    return QuadratureRule::monte_carlo(rule.dim(), std::max<std::size_t>(2, rule.size() / 2), rule.seed());
}

struct Values {
    double primal;
    double dual;
};

Values evaluate(const BassSolution& sol, const DiscreteMeasure& mu, const QuadratureRule& rule) {
    const MaxAffine& v = sol.potential();
    const auto n = sol.zeta.rows();
    Vec per_atom(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        per_atom(ii) = mcov_bass_kernel(v, sol.zeta.row(ii).transpose(), rule);
    });
    const double primal = mu.weights().dot(per_atom);
    const double dual = relaxed_dual(v, mu, v.slopes(), kernel_matrix(sol, rule), rule);
    return {primal, dual};
}

}  // namespace

Mat kernel_matrix(const BassSolution& sol, const QuadratureRule& rule) {
    const MaxAffine& v = sol.potential();
    const auto n = sol.zeta.rows();
    Mat out(n, static_cast<Eigen::Index>(v.pieces()));
    if (v.pieces() == 1) return Mat::Ones(n, 1);
    const GaussianCellIntegrator integ(v, rule);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.row(ii) = integ.integrate(sol.zeta.row(ii).transpose()).masses.transpose();
    });
    return out;
}

DualCertificate duality_gap_report(const BassSolution& sol, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const QuadratureRule& rule) {
    if (mu.dim() != sol.dim || nu.dim() != sol.dim || rule.dim() != sol.dim)
        throw DimensionError("solution, marginals and rule dimensions differ");
    if (static_cast<std::size_t>(sol.zeta.rows()) != mu.size())
        throw DimensionError("solution does not match the source measure");
    const Values fine = evaluate(sol, mu, rule);
    const Values coarse = evaluate(sol, mu, coarser(rule));

    DualCertificate cert;
    cert.primal_value = fine.primal;
    cert.dual_value = fine.dual;
    cert.gap = fine.dual - fine.primal;
    cert.relative_gap = std::abs(cert.gap) / std::max(fine.primal, 1e-6);
    cert.primal_error = std::abs(fine.primal - coarse.primal);
    cert.dual_error = std::abs(fine.dual - coarse.dual);
    cert.psi_gauge = sol.gauge;
    cert.quadrature = rule.describe();
    return cert;
}

}  // namespace bassmt
