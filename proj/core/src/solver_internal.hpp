#pragma once

#include "bassmt/solver.hpp"

namespace bassmt::detail {

// Re-expresses (v, zeta) after the change of variables z -> z + shift:
// v(. + shift) has intercepts c - A shift and the initial atoms move by
// -shift. Intercepts are then re-gauged to sum_j nu_j c_j = 0.
void translate_solution(Vec& intercepts, const Mat& slopes, Mat& zeta, const Vec& shift, const Vec& nu_weights);

Vec regauge(const Vec& intercepts, const Vec& nu_weights);

void check_order_and_irreducibility(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

std::size_t resolve_max_iterations(const SolverOptions& options, bool one_dimensional);

}  // namespace bassmt::detail
