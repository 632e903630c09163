#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "bassmt/normal.hpp"
#include "bassmt/parallel.hpp"
#include "bassmt/solver.hpp"
#include "solver_internal.hpp"

namespace bassmt {

namespace detail {

Vec regauge(const Vec& intercepts, const Vec& nu_weights) {
    return intercepts.array() - nu_weights.dot(intercepts);
}

void translate_solution(Vec& intercepts, const Mat& slopes, Mat& zeta, const Vec& shift, const Vec& nu_weights) {
    intercepts -= slopes * shift;
    zeta.rowwise() -= shift.transpose();
    intercepts = regauge(intercepts, nu_weights);
}

void check_order_and_irreducibility(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim()) throw DimensionError("source and target dimensions differ");
    if (!check_convex_order(mu, nu)) throw NotConvexOrderError("source is not dominated by the target in convex order");
    IrreducibilityReport rep;
    try {
        rep = check_irreducible(mu, nu);
    } catch (const InfeasibleError& e) {
        throw NotConvexOrderError(e.what());
    }
    if (!rep.irreducible) {
        std::ostringstream msg;
        msg << "marginals are not irreducible: no martingale coupling charges source atom "
            << rep.witness->first << " -> target atom " << rep.witness->second;
        throw NotIrreducibleError(msg.str(), rep.witness->first, rep.witness->second);
    }
}

std::size_t resolve_max_iterations(const SolverOptions& options, bool one_dimensional) {
    if (options.max_iterations > 0) return options.max_iterations;
    return one_dimensional ? 500 : 2000;
}

}  // namespace detail

void SolverOptions::validate() const {
    if (!(tol_marginal > 0.0) || !(tol_barycenter > 0.0)) throw InvalidMeasureError("solver tolerances must be positive");
    if (damping && !(*damping > 0.0 && *damping <= 1.0)) throw InvalidMeasureError("damping must lie in (0, 1]");
    if (quantile_grid < 3 || quantile_grid % 2 == 0) throw InvalidMeasureError("quantile grid size must be odd and >= 3");
}

QuadratureRule solver_rule(const SolverOptions& options, std::size_t dim, std::size_t pieces) {
    if (options.quadrature.empty()) return QuadratureRule::default_for(dim, pieces, options.seed);
    return QuadratureRule::parse(options.quadrature, dim);
}

const MaxAffine& BassSolution::potential() const {
    if (!v) throw InvalidMeasureError("solution carries a tabulated profile, not a max-affine potential");
    return *v;
}

DiscreteMeasure BassSolution::alpha() const { return DiscreteMeasure(zeta, alpha_weights); }

DiscreteMeasure BassSolution::nu() const { return DiscreteMeasure(potential().slopes(), nu_weights); }

namespace {

// Root of a non-decreasing function on the line, bracket grown from `guess`.
template <class F>
double solve_increasing(F&& f, double target, double guess, double scale) {
    auto g = [&](double z) { return f(z) - target; };
    double step = std::max(1.0, scale);
    double lo = guess - step, hi = guess + step;
    double glo = g(lo), ghi = g(hi);
    for (int k = 0; glo > 0.0 && k < 200; ++k) { step *= 2.0; lo = guess - step; glo = g(lo); }
    for (int k = 0; ghi < 0.0 && k < 200; ++k) { step *= 2.0; hi = guess + step; ghi = g(hi); }
    if (glo > 0.0 || ghi < 0.0) throw OutOfRangeError("target is outside the range of the smoothed gradient");
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    std::uintmax_t iters = 300;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

DiscreteMeasure line_measure(const Vec& atoms, const Vec& weights) {
    return DiscreteMeasure(Mat(atoms), weights);
}

BassSolution trivial_solution(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    BassSolution sol;
    sol.dim = mu.dim();
    sol.v = MaxAffine(nu.atoms(), Vec::Zero(1));
    sol.zeta = mu.atoms();
    sol.alpha_weights = mu.weights();
    sol.nu_weights = nu.weights();
    sol.converged = true;
    sol.reduced_dim = 0;
    sol.quadrature = "none";
    return sol;
}

BassSolution solve_discrete_targets(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverOptions& opt) {
    detail::check_order_and_irreducibility(mu, nu);
    if (nu.size() == 1) return trivial_solution(mu, nu);

    const std::size_t J = nu.size();
    const std::size_t n = mu.size();
    std::vector<std::size_t> perm(J);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return nu.atoms()(static_cast<Eigen::Index>(a), 0) < nu.atoms()(static_cast<Eigen::Index>(b), 0);
    });
    std::vector<double> y(J), w(J), cum_left(J), tail_right(J);
    for (std::size_t j = 0; j < J; ++j) {
        y[j] = nu.atoms()(static_cast<Eigen::Index>(perm[j]), 0);
        w[j] = nu.weight(perm[j]);
    }
    std::partial_sum(w.begin(), w.end(), cum_left.begin());
    tail_right[J - 1] = 0.0;
    for (std::size_t j = J - 1; j-- > 0;) tail_right[j] = tail_right[j + 1] + w[j + 1];

    const Vec x = mu.atoms().col(0);
    const Vec& mw = mu.weights();
    const double eta = opt.damping.value_or(1.0);
    const std::size_t max_iter = detail::resolve_max_iterations(opt, true);
    const double scale = 1.0 + std::abs(y.front()) + std::abs(y.back());

    Vec zeta = x;
    std::vector<double> b(J - 1);
    auto smoothed_gradient = [&](double z) {
        double g = y[0];
        for (std::size_t j = 0; j + 1 < J; ++j) g += (y[j + 1] - y[j]) * normal::cdf(z - b[j]);
        return g;
    };

    BassSolution sol;
    sol.dim = 1;
    sol.reduced_dim = 1;
    sol.quadrature = "exact-1d";
    Vec nu_hat(static_cast<Eigen::Index>(J));
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const DiscreteMeasure alpha = line_measure(zeta, mw);
        for (std::size_t j = 0; j + 1 < J; ++j)
            b[j] = cum_left[j] <= 0.5 ? mixture_quantile(alpha, cum_left[j]) : mixture_quantile(alpha, tail_right[j], 1.0, true);

        Vec next(static_cast<Eigen::Index>(n));
        parallel_for(n, [&](std::size_t i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double solved = solve_increasing(smoothed_gradient, x(ii), zeta(ii), scale);
            next(ii) = zeta(ii) + eta * (solved - zeta(ii));
        });

        double bary = 0.0;
        nu_hat.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            bary = std::max(bary, std::abs(smoothed_gradient(next(ii)) - x(ii)));
            double lo = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < J; ++j) {
                const double hi = j + 1 < J ? b[j] : std::numeric_limits<double>::infinity();
                nu_hat(static_cast<Eigen::Index>(j)) += mw(ii) * normal::interval_mass(lo - next(ii), hi - next(ii));
                lo = hi;
            }
        }
        double marginal = 0.0;
        for (std::size_t j = 0; j < J; ++j) marginal = std::max(marginal, std::abs(nu_hat(static_cast<Eigen::Index>(j)) - w[j]));

        sol.w2_history.push_back(wasserstein2_1d(line_measure(next, mw), alpha));
        sol.marginal_history.push_back(marginal);
        zeta = next;
        sol.iterations = it;
        sol.residuals = {marginal, bary};
        if (marginal < opt.tol_marginal && bary < opt.tol_barycenter) {
            sol.converged = true;
            break;
        }
    }

    // Intercepts from continuity at the breakpoints, in sorted order.
    Vec c_sorted(static_cast<Eigen::Index>(J));
    c_sorted(0) = 0.0;
    for (std::size_t j = 0; j + 1 < J; ++j)
        c_sorted(static_cast<Eigen::Index>(j + 1)) = c_sorted(static_cast<Eigen::Index>(j)) + (y[j + 1] - y[j]) * b[j];
    Vec c(static_cast<Eigen::Index>(J));
    for (std::size_t j = 0; j < J; ++j) c(static_cast<Eigen::Index>(perm[j])) = c_sorted(static_cast<Eigen::Index>(j));

    Mat zeta_mat = zeta;
    const Vec shift = Vec::Constant(1, mw.dot(zeta) - mw.dot(x));
    detail::translate_solution(c, nu.atoms(), zeta_mat, shift, nu.weights());
    sol.v = MaxAffine(nu.atoms(), c);
    sol.zeta = zeta_mat;
    sol.alpha_weights = mw;
    sol.nu_weights = nu.weights();
    if (!sol.converged) {
        std::ostringstream msg;
        msg << "1-D fixed point did not converge in " << max_iter << " iterations (marginal residual "
            << sol.residuals.marginal << ", barycenter residual " << sol.residuals.barycenter << ")";
        throw MaxIterationsError(msg.str(), sol);
    }
    return sol;
}

// Approximate convex-order screen for a quantile-form target.
void check_order_quantile(const DiscreteMeasure& mu, const QuantileFunction& nu) {
    constexpr std::size_t N = 8192;
    const DiscreteMeasure grid = discretize_quantile(nu, N);
    const double mean_mu = mu.weights().dot(mu.atoms().col(0));
    const double mean_nu = grid.weights().dot(grid.atoms().col(0));
    const double scale = 1.0 + grid.atoms().cwiseAbs().maxCoeff();
    if (std::abs(mean_mu - mean_nu) > 1e-3 * scale)
        throw NotConvexOrderError("source and target means differ");
    for (Eigen::Index i = 0; i < mu.atoms().rows(); ++i) {
        const double k = mu.atoms()(i, 0);
        const double um = mu.weights().dot((mu.atoms().col(0).array() - k).abs().matrix());
        const double un = grid.weights().dot((grid.atoms().col(0).array() - k).abs().matrix());
        if (um > un + 1e-3 * scale) throw NotConvexOrderError("source is not dominated by the target in convex order");
    }
}

BassSolution solve_quantile_target(const DiscreteMeasure& mu, const QuantileFunction& nu, const SolverOptions& opt) {
    check_order_quantile(mu, nu);
    const QuadratureRule rule = solver_rule(opt, 1, 1);
    const std::size_t n = mu.size();
    const std::size_t N = opt.quantile_grid;
    const Vec x = mu.atoms().col(0);
    const Vec& mw = mu.weights();
    const double eta = opt.damping.value_or(1.0);
    const std::size_t max_iter = detail::resolve_max_iterations(opt, true);
    std::vector<double> u(N), q(N);
    for (std::size_t k = 0; k < N; ++k) {
        u[k] = static_cast<double>(k + 1) / static_cast<double>(N + 1);
        q[k] = nu.quantile(u[k]);
    }
    auto clamp_level = [](double p) { return std::clamp(p, 1e-300, 1.0 - 1e-16); };

    BassSolution sol;
    sol.dim = 1;
    sol.reduced_dim = 1;
    sol.quadrature = rule.describe();
    sol.warnings.push_back("irreducibility not checked for a quantile-form target");

    Vec zeta = x;
    std::vector<double> grid(N);
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const DiscreteMeasure alpha = line_measure(zeta, mw);
        auto smoothed_gradient = [&](double z) {
            double g = 0.0;
            for (std::size_t k = 0; k < rule.size(); ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                g += rule.weights()(kk) * nu.quantile(clamp_level(mixture_cdf(alpha, z + rule.nodes()(kk, 0))));
            }
            return g;
        };
        Vec next(static_cast<Eigen::Index>(n));
        parallel_for(n, [&](std::size_t i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double solved = solve_increasing(smoothed_gradient, x(ii), zeta(ii), 1.0);
            next(ii) = zeta(ii) + eta * (solved - zeta(ii));
        });
        double bary = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            bary = std::max(bary, std::abs(smoothed_gradient(next(static_cast<Eigen::Index>(i))) - x(static_cast<Eigen::Index>(i))));

        parallel_for(N, [&](std::size_t k) {
            grid[k] = u[k] <= 0.5 ? mixture_quantile(alpha, u[k]) : mixture_quantile(alpha, 1.0 - u[k], 1.0, true);
        });
        const DiscreteMeasure alpha_next = line_measure(next, mw);
        double marginal = 0.0;
        for (std::size_t k = 0; k < N; ++k) marginal = std::max(marginal, std::abs(mixture_cdf(alpha_next, grid[k]) - u[k]));

        sol.w2_history.push_back(wasserstein2_1d(alpha_next, alpha));
        sol.marginal_history.push_back(marginal);
        zeta = next;
        sol.iterations = it;
        sol.residuals = {marginal, bary};
        if (marginal < opt.tol_marginal && bary < opt.tol_barycenter) {
            sol.converged = true;
            break;
        }
    }

    const double shift = mw.dot(zeta) - mw.dot(x);
    MonotoneProfile profile;
    profile.z.resize(N);
    profile.slope = q;
    for (std::size_t k = 0; k < N; ++k) profile.z[k] = grid[k] - shift;
    sol.profile = std::move(profile);
    sol.zeta = (zeta.array() - shift).matrix();
    sol.alpha_weights = mw;
    if (!sol.converged) {
        std::ostringstream msg;
        msg << "1-D quantile fixed point did not converge in " << max_iter << " iterations (marginal residual "
            << sol.residuals.marginal << ")";
        throw MaxIterationsError(msg.str(), sol);
    }
    return sol;
}

}  // namespace

BassSolution solve_bass_1d(const Marginal1d& mu_in, const Marginal1d& nu_in, const SolverOptions& options) {
    options.validate();
    DiscreteMeasure mu;
    std::vector<std::string> notes;
    if (std::holds_alternative<QuantileFunction>(mu_in)) {
        mu = discretize_quantile(std::get<QuantileFunction>(mu_in), options.quantile_grid);
        notes.push_back("source quantile function discretized on the quantile grid");
    } else {
        mu = std::get<DiscreteMeasure>(mu_in);
    }
    if (mu.dim() != 1) throw DimensionError("solve_bass_1d requires one-dimensional marginals");

    BassSolution sol;
    if (std::holds_alternative<DiscreteMeasure>(nu_in)) {
        const auto& nu = std::get<DiscreteMeasure>(nu_in);
        if (nu.dim() != 1) throw DimensionError("solve_bass_1d requires one-dimensional marginals");
        sol = solve_discrete_targets(mu, nu, options);
    } else {
        sol = solve_quantile_target(mu, std::get<QuantileFunction>(nu_in), options);
    }
    sol.warnings.insert(sol.warnings.end(), notes.begin(), notes.end());
    return sol;
}

BassSolution solve_bass(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverOptions& options) {
    if (mu.dim() != nu.dim()) throw DimensionError("source and target dimensions differ");
    if (mu.dim() == 1) return solve_bass_1d(mu, nu, options);
    return solve_bass_nd(mu, nu, options);
}

}  // namespace bassmt
