#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>
#include <sstream>

#include "bassmt/parallel.hpp"
#include "bassmt/solver.hpp"
#include "solver_internal.hpp"

namespace bassmt {

namespace {

struct ReducedResult {
    Vec intercepts;
    Mat zeta;
    BassSolution meta;
};

// Intercept iteration on targets that affinely span the working space.
ReducedResult intercept_iteration(const Mat& x, const Vec& mw, const Mat& targets, const Vec& nw,
                                  const SolverOptions& opt) {
    const auto n = x.rows();
    const auto J = targets.rows();
    const auto r = static_cast<std::size_t>(targets.cols());
    const QuadratureRule rule = solver_rule(opt, r, static_cast<std::size_t>(J));
    const double eta = opt.damping.value_or(0.5);
    const std::size_t max_iter = detail::resolve_max_iterations(opt, false);

    Vec c = Vec::Zero(J);
    if (opt.initial_intercepts) {
        if (opt.initial_intercepts->size() != J) throw DimensionError("initial intercepts do not match the target atoms");
        c = detail::regauge(*opt.initial_intercepts, nw);
    }
    GaussianCellIntegrator integ(MaxAffine(targets, c), rule);
    InverseOptions inv;
    inv.tol = 0.1 * opt.tol_barycenter;

    // Everything the update needs at one set of intercepts. `dual` is
    // sum_j nu_j c_j - sum_i mu_i phi(x_i), a convex function of c whose
    // gradient is nu - nu_hat.
    struct State {
        Vec c;
        Mat zeta;
        Mat masses;
        double bary = 0.0;
        double dual = 0.0;
    };
    auto evaluate = [&](const Vec& cc, const Mat& start, State& st) {
        integ.set_intercepts(cc);
        st.c = cc;
        st.zeta = start;
        st.masses.resize(n, J);
        std::vector<double> bary(static_cast<std::size_t>(n)), phi(static_cast<std::size_t>(n));
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            const auto ii = static_cast<Eigen::Index>(i);
            InverseOptions local = inv;
            local.start = Vec(start.row(ii).transpose());
            const Vec xi = x.row(ii).transpose();
            const Vec z = smoothed_grad_inverse(integ, xi, local);
            const auto stats = integ.integrate(z);
            st.zeta.row(ii) = z.transpose();
            st.masses.row(ii) = stats.masses.transpose();
            bary[i] = (stats.gradient - xi).cwiseAbs().maxCoeff();
            phi[i] = z.dot(xi) - stats.value;
        });
        st.bary = 0.0;
        st.dual = nw.dot(cc);
        for (Eigen::Index i = 0; i < n; ++i) {
            st.bary = std::max(st.bary, bary[static_cast<std::size_t>(i)]);
            st.dual -= mw(i) * phi[static_cast<std::size_t>(i)];
        }
    };

    ReducedResult out;
    out.meta.quadrature = rule.describe();
    State cur;
    evaluate(c, x, cur);
    // Curvature pairs (s, y) of the dual, y the change in its gradient
    // nu - nu_hat. They refine the log-mass step on badly scaled instances.
    constexpr std::size_t kMemory = 8;
    std::deque<std::pair<Vec, Vec>> pairs;
    const Vec h0 = nw.cwiseInverse();
    double step = eta;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const Vec nu_hat = cur.masses.transpose() * mw;
        const double marginal = (nu_hat - nw).cwiseAbs().maxCoeff();
        out.meta.marginal_history.push_back(marginal);
        out.meta.iterations = it;
        out.meta.residuals = {marginal, cur.bary};
        if (marginal < opt.tol_marginal && cur.bary < opt.tol_barycenter) {
            out.meta.converged = true;
            break;
        }
        if (it == max_iter) break;
        const Vec grad = nw - nu_hat;
        Vec dir(J);
        double trial = step;
        if (pairs.empty()) {
            for (Eigen::Index j = 0; j < J; ++j) dir(j) = std::log(std::max(nu_hat(j), 1e-300)) - std::log(nw(j));
        } else {
            // Two-loop recursion, initial inverse Hessian a multiple of
            // diag(1 / nu), the linearization of the log-mass step.
            Vec q = grad;
            std::vector<double> a(pairs.size());
            for (std::size_t k = pairs.size(); k-- > 0;) {
                a[k] = pairs[k].first.dot(q) / pairs[k].first.dot(pairs[k].second);
                q -= a[k] * pairs[k].second;
            }
            const Vec& ys = pairs.back().second;
            const double scale = pairs.back().first.dot(ys) / ys.dot(h0.cwiseProduct(ys));
            Vec r = scale * h0.cwiseProduct(q);
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                const double b = pairs[k].second.dot(r) / pairs[k].first.dot(pairs[k].second);
                r += (a[k] - b) * pairs[k].first;
            }
            dir = -r;
            trial = 1.0;
            if (dir.dot(grad) >= 0.0) {
                pairs.clear();
                for (Eigen::Index j = 0; j < J; ++j) dir(j) = std::log(std::max(nu_hat(j), 1e-300)) - std::log(nw(j));
                trial = step;
            }
        }
        // Backtrack until the dual does not increase; far from the solution
        // a full step can overshoot and push cells out of reach.
        State next;
        bool accepted = false;
        for (int halvings = 0; halvings < 40 && !accepted; ++halvings) {
            try {
                evaluate(detail::regauge(cur.c + trial * dir, nw), cur.zeta, next);
                accepted = next.dual <= cur.dual + 1e-12 * (1.0 + std::abs(cur.dual));
            } catch (const Error&) {
            }
            if (!accepted) trial *= 0.5;
        }
        if (!accepted) {
            out.meta.warnings.push_back("intercept update stalled: no step decreased the dual functional");
            break;
        }
        const Vec sk = next.c - cur.c;
        const Vec yk = (nw - next.masses.transpose() * mw) - grad;
        if (sk.dot(yk) > 1e-12 * sk.norm() * yk.norm()) {
            pairs.emplace_back(sk, yk);
            if (pairs.size() > kMemory) pairs.pop_front();
        }
        cur = std::move(next);
        if (pairs.empty() || trial < 1.0) step = std::min(eta, 2.0 * std::min(trial, step));
    }
    c = cur.c;
    const Mat& zeta = cur.zeta;
    out.intercepts = c;
    out.zeta = zeta;
    return out;
}

}  // namespace

BassSolution solve_bass_nd(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverOptions& options) {
    options.validate();
    detail::check_order_and_irreducibility(mu, nu);
    const std::size_t d = mu.dim();
    const Vec& mw = mu.weights();
    const Vec& nw = nu.weights();

    BassSolution sol;
    sol.dim = d;
    sol.alpha_weights = mw;
    sol.nu_weights = nw;

    const AffineHull hull = affine_hull(nu.atoms());
    const std::size_t r = hull.rank();
    if (r == 0) {
        sol.v = MaxAffine(nu.atoms(), Vec::Zero(1));
        sol.zeta = mu.atoms();
        sol.converged = true;
        sol.quadrature = "none";
        return sol;
    }

    // Reduced coordinates: targets B'(a_j - o), sources B'(x_i - o).
    const Mat& B = hull.basis;
    const Mat red_targets = (nu.atoms().rowwise() - hull.origin.transpose()) * B;
    const Mat red_sources = (mu.atoms().rowwise() - hull.origin.transpose()) * B;
    if (r < d) {
        std::ostringstream note;
        note << "target support spans an affine subspace of dimension " << r << "; solved in the reduced frame";
        sol.warnings.push_back(note.str());
    }

    Vec c;
    Mat red_zeta;
    BassSolution meta;
    bool converged = false;
    std::string failure;
    if (r == 1) {
        SolverOptions one = options;
        one.initial_intercepts.reset();
        try {
            meta = solve_bass_1d(DiscreteMeasure(red_sources, mw), DiscreteMeasure(red_targets, nw), one);
            converged = true;
        } catch (const MaxIterationsError& e) {
            meta = e.partial();
            failure = e.what();
        }
        c = meta.potential().intercepts();
        red_zeta = meta.zeta;
    } else {
        ReducedResult res = intercept_iteration(red_sources, mw, red_targets, nw, options);
        c = res.intercepts;
        red_zeta = res.zeta;
        meta = res.meta;
        converged = meta.converged;
        if (!converged) {
            std::ostringstream msg;
            msg << "intercept iteration did not converge in " << meta.iterations << " iterations (marginal residual "
                << meta.residuals.marginal << ", barycenter residual " << meta.residuals.barycenter << ")";
            failure = msg.str();
        }
    }

    // Gauge: the reduced atoms are the coordinates B'zeta, so the barycenter
    // target there is B' bary(mu); the orthogonal part is taken from bary(mu).
    const Vec xbar = mu.atoms().transpose() * mw;
    const Vec shift = red_zeta.transpose() * mw - B.transpose() * xbar;
    detail::translate_solution(c, red_targets, red_zeta, shift, nw);
    const Mat ortho = Mat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) - B * B.transpose();
    sol.zeta = (red_zeta * B.transpose()).rowwise() + (ortho * xbar).transpose();
    sol.v = MaxAffine(nu.atoms(), c);
    sol.residuals = meta.residuals;
    sol.iterations = meta.iterations;
    sol.converged = converged;
    sol.quadrature = meta.quadrature;
    sol.reduced_dim = r;
    sol.marginal_history = meta.marginal_history;
    sol.w2_history = meta.w2_history;
    sol.warnings.insert(sol.warnings.end(), meta.warnings.begin(), meta.warnings.end());
    if (!converged) throw MaxIterationsError(failure, sol);
    return sol;
}

}  // namespace bassmt
