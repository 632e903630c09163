#pragma once

#include "bassmt/convexfn.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/quadrature.hpp"

namespace bassmt {

// Maximal covariance sup_q int <x, y> dq over couplings q of p and q.
double mcov_1d(const DiscreteMeasure& p, const DiscreteMeasure& q);
// Exact optimum of the transportation LP in any dimension.
double mcov_discrete(const DiscreteMeasure& p, const DiscreteMeasure& q);

// Probability of each affine piece's cell under N(zeta, I): the weights the
// Bass kernel puts on the slopes.
struct CellMassVector {
    Vec masses;

    double total() const { return masses.sum(); }
};

enum class CellMassMethod {
    // Closed form along a line, rule on the remaining axes (exact in dim 1).
    LineExact,
    // Weighted count of rule nodes z with piece j active at zeta + z.
    NodeCount,
};

CellMassVector gaussian_cell_masses(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule,
                                    CellMassMethod method = CellMassMethod::LineExact);

// Standard error of each NodeCount mass, estimated from the antithetic pair
// means of a Monte-Carlo rule (zeros for deterministic rules).
Vec cell_mass_standard_errors(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule);

// E[<grad v(zeta + Z), Z>], Z ~ gamma: MCov of the Bass kernel with gamma.
double mcov_bass_kernel(const MaxAffine& v, const Vec& zeta, const QuadratureRule& rule);
double mcov_bass_kernel(const AnalyticConvex& v, const Vec& zeta, const QuadratureRule& rule);

}  // namespace bassmt
