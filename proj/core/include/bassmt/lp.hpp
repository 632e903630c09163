#pragma once

#include <cstddef>
#include <vector>

#include "bassmt/types.hpp"

namespace bassmt::lp {

// Dense equality-form linear program:  minimize c'x  s.t.  A x = b,  x >= 0.
struct LinearProgram {
    Mat A;
    Vec b;
    Vec c;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

struct Result {
    Status status = Status::Infeasible;
    double objective = 0.0;
    Vec x;
    // Phase-one residual (sum of artificial variables) at termination.
    double infeasibility = 0.0;
    std::size_t pivots = 0;
};

struct Options {
    double feasibility_tol = 1e-9;
    double pivot_tol = 1e-11;
    double cost_tol = 1e-11;
    std::size_t max_pivots = 200000;
};

// Two-phase tableau simplex. Dantzig pricing with a switch to Bland's rule
// after a run of degenerate pivots, which rules out cycling on the highly
// degenerate transport polytopes this library produces.
Result solve(const LinearProgram& problem, const Options& options = {});

}  // namespace bassmt::lp
