#pragma once

#include <string>

#include "bassmt/convexfn.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/quadrature.hpp"

// Dual functionals for the martingale transport problem. The dual potential
// psi is always represented through its conjugate v = psi*, so that
// psi = v** = conjugate of v and dom psi = conv{slopes of v}.
namespace bassmt {

struct DualCertificate {
    double dual_value = 0.0;
    double primal_value = 0.0;
    double gap = 0.0;           // dual - primal
    double relative_gap = 0.0;  // |gap| / max(primal, 1e-6)
    // Quadrature error estimate for each value (difference to a coarser rule).
    double primal_error = 0.0;
    double dual_error = 0.0;
    std::string psi_gauge;
    std::string quadrature;
};

// phi^psi(x) = sup_zeta (<zeta, x> - (v * gamma)(zeta)) = (v * gamma)*(x).
double phi_psi(const MaxAffine& v, const Vec& x, const QuadratureRule& rule);
double phi_psi(const AnalyticConvex& v, const Vec& x, const QuadratureRule& rule);

// int psi dnu - int phi^psi dmu. Returns +infinity (a legal value) when some
// nu-atom lies outside dom psi; throws OutOfRangeError for mu-atoms outside
// the interior of dom psi.
double dual_value(const MaxAffine& v, const DiscreteMeasure& mu, const DiscreteMeasure& nu, const QuadratureRule& rule);
double dual_value(const AnalyticConvex& v, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const QuadratureRule& rule);

// sum_i mu_i ( sum_j pi_ij / mu_i psi(y_j) - phi^psi(x_i) ); the same for
// every martingale coupling with the given marginals.
double relaxed_dual(const MaxAffine& v, const MartingaleCoupling& pi, const QuadratureRule& rule);
double relaxed_dual(const AnalyticConvex& v, const MartingaleCoupling& pi, const QuadratureRule& rule);
// Kernel form: row i of `kernels` is a probability vector over `targets`
// (pieces x dim); used with the kernels of a computed solution.
double relaxed_dual(const MaxAffine& v, const DiscreteMeasure& mu, const Mat& targets, const Mat& kernels,
                    const QuadratureRule& rule);

// rho^psi = int psi* dgamma = int v dgamma.
double rho_psi(const MaxAffine& v, const QuadratureRule& rule);
double rho_psi(const AnalyticConvex& v, const QuadratureRule& rule);

bool is_infinite_value(double value);

}  // namespace bassmt
