#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bassmt/convexfn.hpp"
#include "bassmt/dualeval.hpp"
#include "bassmt/errors.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/quadrature.hpp"

namespace bassmt {

struct SolverOptions {
    // "gh:<n>" or "mc:<samples>:<seed>"; empty selects the library default.
    std::string quadrature;
    // Zero selects the default: 500 (1-D) or 2000 (multi-dimensional).
    std::size_t max_iterations = 0;
    double tol_marginal = 1e-4;
    double tol_barycenter = 1e-6;
    // Defaults to 1.0 for the 1-D iteration and 0.5 for the nd iteration.
    std::optional<double> damping;
    std::size_t quantile_grid = 513;
    std::uint64_t seed = 0;
    // nd only: starting intercepts (re-gauged before use).
    std::optional<Vec> initial_intercepts;

    void validate() const;
};

struct Residuals {
    // max_j |nu_hat_j - nu_j| (CDF sup-distance for quantile-form targets).
    double marginal = 0.0;
    // max_i |(grad v * gamma)(zeta_i) - x_i|.
    double barycenter = 0.0;
};

inline constexpr const char* kGaugeName = "nu-weighted-intercepts-zero";

// Solved Bass martingale: potential v (slopes = target atoms in input order)
// and initial law alpha (atom i = zeta(x_i), weight mu_i).
//
// Gauge: sum_j nu_j c_j = 0 and barycenter(alpha) = barycenter(mu).
struct BassSolution {
    std::size_t dim = 0;
    std::optional<MaxAffine> v;
    // Quantile-form targets: v' tabulated on z_k = F_{alpha*gamma}^{-1}(u_k).
    std::optional<MonotoneProfile> profile;
    Mat zeta;  // n x dim, row i = zeta(x_i)
    Vec alpha_weights;
    Vec nu_weights;  // weights of the slopes of v (empty for profiles)
    std::string gauge = kGaugeName;
    Residuals residuals;
    std::size_t iterations = 0;
    bool converged = false;
    std::string quadrature;
    std::size_t reduced_dim = 0;
    std::vector<double> marginal_history;
    // 1-D iteration: W2(alpha_{n+1}, alpha_n) per iteration.
    std::vector<double> w2_history;
    std::vector<std::string> warnings;

    const MaxAffine& potential() const;
    DiscreteMeasure alpha() const;
    DiscreteMeasure nu() const;
};

// Thrown when the iteration budget is exhausted; carries the last iterate.
class MaxIterationsError : public Error {
public:
    MaxIterationsError(const std::string& what, BassSolution partial)
        : Error(what), partial_(std::move(partial)) {}
    const BassSolution& partial() const noexcept { return partial_; }

private:
    BassSolution partial_;
};

using Marginal1d = std::variant<DiscreteMeasure, QuantileFunction>;

// Fixed-point iteration in dimension one: given alpha_n, v_n' is the
// monotone rearrangement of alpha_n * gamma onto nu, and alpha_{n+1} =
// (v_n' * gamma)^{-1}(mu). Starts from alpha_0 = mu.
BassSolution solve_bass_1d(const Marginal1d& mu, const Marginal1d& nu, const SolverOptions& options = {});

// Intercept iteration for discrete nu in any dimension: solve the first-order
// condition (grad v * gamma)(zeta_i) = x_i for every source atom, then move
// c_j <- c_j + eta (log nu_hat_j - log nu_j) and re-gauge. Targets that do not
// affinely span are reduced to their affine hull first.
BassSolution solve_bass_nd(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverOptions& options = {});

// Dispatches on dimension: solve_bass_1d for dim 1, solve_bass_nd otherwise.
BassSolution solve_bass(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverOptions& options = {});

// Primal value sum_i mu_i MCov(kernel_i, gamma), dual value of the relaxed
// functional along the solution's kernel coupling, and their gap.
DualCertificate duality_gap_report(const BassSolution& sol, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const QuadratureRule& rule);

// Cell masses of the solution at source atom i (row i of the kernel
// coupling), n x pieces.
Mat kernel_matrix(const BassSolution& sol, const QuadratureRule& rule);

QuadratureRule solver_rule(const SolverOptions& options, std::size_t dim, std::size_t pieces);

}  // namespace bassmt
