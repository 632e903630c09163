#include "bassmt/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "bassmt/errors.hpp"
#include "bassmt/lp.hpp"
#include "bassmt/normal.hpp"
#include "bassmt/parallel.hpp"

namespace bassmt {

namespace {

constexpr std::size_t kCloudCap = 2'000'000;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// grad(b, variance) returns grad v_t(b) for variance = 1 - t > 0 and the raw
// gradient for variance = 0, together with the smallest cell mass (NaN when
// v is not max-affine).
struct GradientValue {
    Vec gradient;
    double floor;
};
using GradientMap = std::function<GradientValue(const Vec&, double)>;

PathEnsemble simulate(const GradientMap& grad, const DiscreteMeasure& alpha, std::size_t n_paths,
                      std::size_t n_steps, std::uint64_t seed, bool track_masses) {
    if (n_paths == 0) throw InvalidMeasureError("at least one path is required");
    if (n_steps < 2) throw InvalidMeasureError("at least two time steps are required");
    const std::size_t d = alpha.dim();
    const auto dd = static_cast<Eigen::Index>(d);
    const auto np = static_cast<Eigen::Index>(n_paths);

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.dim = d;
    ens.seed = seed;
    ens.times.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) ens.times[k] = static_cast<double>(k) / static_cast<double>(n_steps);
    ens.times.back() = 1.0;
    ens.b.assign(n_steps + 1, Mat(np, dd));
    ens.m.assign(n_steps + 1, Mat(np, dd));
    ens.alpha_index.resize(n_paths);
    if (track_masses) ens.cell_mass_floor.resize(np, static_cast<Eigen::Index>(n_steps));

    // Systematic assignment of paths to alpha atoms.
    std::vector<double> cum(alpha.size());
    std::partial_sum(alpha.weights().begin(), alpha.weights().end(), cum.begin());
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double u = (static_cast<double>(p) + 0.5) / static_cast<double>(n_paths);
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        ens.alpha_index[p] = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), alpha.size() - 1);
    }

    // Latin-hypercube strata of the terminal increment, one permutation per
    // coordinate.
    std::mt19937_64 master(splitmix(seed));
    std::vector<std::vector<std::size_t>> strata(d, std::vector<std::size_t>(n_paths));
    for (auto& perm : strata) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n_paths; i > 1; --i) std::swap(perm[i - 1], perm[master() % i]);
    }

    parallel_for(n_paths, [&](std::size_t p) {
        const auto pp = static_cast<Eigen::Index>(p);
        std::mt19937_64 rng(splitmix(seed ^ splitmix(p + 1)));
        std::normal_distribution<double> gauss;
        const Vec b0 = alpha.atom(ens.alpha_index[p]);
        Vec w1(dd);
        for (std::size_t c = 0; c < d; ++c) {
            const double u = (static_cast<double>(strata[c][p]) + open_uniform(rng)) / static_cast<double>(n_paths);
            w1(static_cast<Eigen::Index>(c)) = normal::quantile(u);
        }
        const Vec b1 = b0 + w1;
        Vec cur = b0;
        ens.b[0].row(pp) = b0.transpose();
        for (std::size_t k = 1; k < n_steps; ++k) {
            const double t0 = ens.times[k - 1], t1 = ens.times[k];
            const double frac = (t1 - t0) / (1.0 - t0);
            const double sd = std::sqrt((t1 - t0) * (1.0 - t1) / (1.0 - t0));
            Vec next = cur + frac * (b1 - cur);
            for (Eigen::Index c = 0; c < dd; ++c) next(c) += sd * gauss(rng);
            ens.b[k].row(pp) = next.transpose();
            cur = next;
        }
        ens.b[n_steps].row(pp) = b1.transpose();
        for (std::size_t k = 0; k <= n_steps; ++k) {
            const double var = k == n_steps ? 0.0 : 1.0 - ens.times[k];
            const GradientValue g = grad(ens.b[k].row(pp).transpose(), var);
            ens.m[k].row(pp) = g.gradient.transpose();
            if (track_masses && k < n_steps) ens.cell_mass_floor(pp, static_cast<Eigen::Index>(k)) = g.floor;
        }
    });

    ens.cross_variation = Vec::Zero(np);
    ens.relative_variation = Vec::Zero(np);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        const Mat db = ens.b[k] - ens.b[k - 1];
        const Mat dm = ens.m[k] - ens.m[k - 1];
        ens.cross_variation += dm.cwiseProduct(db).rowwise().sum();
        ens.relative_variation += (dm - db).rowwise().squaredNorm();
    }
    return ens;
}

GradientMap max_affine_gradient(const MaxAffine& v, const QuadratureRule& rule) {
    auto integ = std::make_shared<GaussianCellIntegrator>(v, rule);
    return [integ](const Vec& b, double var) -> GradientValue {
        if (var <= 0.0) return {eval_subgradient(integ->potential(), b), 0.0};
        auto stats = integ->integrate(b, var);
        return {std::move(stats.gradient), stats.masses.minCoeff()};
    };
}

double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// Counter-clockwise convex hull (monotone chain), collinear points dropped.
std::vector<Vec> hull_2d(const Mat& pts) {
    std::vector<Vec> p;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) p.push_back(pts.row(i).transpose());
    std::sort(p.begin(), p.end(), [](const Vec& a, const Vec& b) { return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1)); });
    if (p.size() < 3) return p;
    auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
        return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
    };
    std::vector<Vec> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0.0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0.0) --k;
        h[k++] = p[i - 1];
    }
    h.resize(k - 1);
    return h;
}

double lp_depth(const Mat& atoms, const Vec& point) {
    const auto J = atoms.rows();
    const auto d = atoms.cols();
    // Variables: l_j = s + mu_j with mu_j >= 0, s >= 0.
    lp::LinearProgram prog;
    prog.A = Mat::Zero(d + 1, J + 1);
    prog.A.topLeftCorner(d, J) = atoms.transpose();
    prog.A.topRightCorner(d, 1) = atoms.colwise().sum().transpose();
    prog.A.bottomLeftCorner(1, J).setOnes();
    prog.A(d, J) = static_cast<double>(J);
    prog.b = Vec(d + 1);
    prog.b.head(d) = point;
    prog.b(d) = 1.0;
    prog.c = Vec::Zero(J + 1);
    prog.c(J) = -1.0;
    const auto res = lp::solve(prog);
    if (res.status != lp::Status::Optimal) return -1.0;
    return -res.objective;
}

}  // namespace

// v = max_k <a_k, z> - c_k. Max delta in [0, 1] with
// <a_k - a_j, z> + delta <= c_k - c_j for all k != j.
double cell_margin(const MaxAffine& v, std::size_t j) {
    const auto J = static_cast<Eigen::Index>(v.pieces());
    const auto d = static_cast<Eigen::Index>(v.dim());
    if (j >= v.pieces()) throw IndexError("piece index out of range");
    if (J == 1) return 1.0;
    const auto jj = static_cast<Eigen::Index>(j);
    // Variables: z+ (d), z- (d), delta, slack for delta <= 1, one slack per row.
    const Eigen::Index rows = J;  // J - 1 comparisons plus the delta cap
    const Eigen::Index cols = 2 * d + 2 + (J - 1);
    lp::LinearProgram prog;
    prog.A = Mat::Zero(rows, cols);
    prog.b = Vec::Zero(rows);
    prog.c = Vec::Zero(cols);
    prog.c(2 * d) = -1.0;
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < J; ++k) {
        if (k == jj) continue;
        const Vec diff = (v.slopes().row(k) - v.slopes().row(jj)).transpose();
        prog.A.block(r, 0, 1, d) = diff.transpose();
        prog.A.block(r, d, 1, d) = -diff.transpose();
        prog.A(r, 2 * d) = 1.0;
        prog.A(r, 2 * d + 2 + r) = 1.0;
        prog.b(r) = v.intercepts()(k) - v.intercepts()(jj);
        if (prog.b(r) < 0.0) {
            prog.A.row(r) *= -1.0;
            prog.b(r) *= -1.0;
        }
        ++r;
    }
    prog.A(r, 2 * d) = 1.0;
    prog.A(r, 2 * d + 1) = 1.0;
    prog.b(r) = 1.0;
    const auto res = lp::solve(prog);
    if (res.status != lp::Status::Optimal) return 0.0;
    return -res.objective;
}

Vec cell_margins(const MaxAffine& v) {
    Vec out(static_cast<Eigen::Index>(v.pieces()));
    for (std::size_t j = 0; j < v.pieces(); ++j) out(static_cast<Eigen::Index>(j)) = cell_margin(v, j);
    return out;
}

ForwardMarginals forward_construct(const MaxAffine& v, const DiscreteMeasure& alpha, const QuadratureRule& rule) {
    if (v.dim() != alpha.dim() || rule.dim() != v.dim()) throw DimensionError("dimensions of v, alpha and rule differ");
    const GaussianCellIntegrator integ(v, rule);
    const auto n = static_cast<Eigen::Index>(alpha.size());
    Mat mu_atoms(n, static_cast<Eigen::Index>(v.dim()));
    Vec nu_w = Vec::Zero(static_cast<Eigen::Index>(v.pieces()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto s = integ.integrate(alpha.atoms().row(i).transpose());
        mu_atoms.row(i) = s.gradient.transpose();
        nu_w += alpha.weights()(i) * s.masses;
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < nu_w.size(); ++j)
        if (nu_w(j) > 0.0) keep.push_back(j);
    Mat nu_atoms(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(v.dim()));
    Vec w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        nu_atoms.row(static_cast<Eigen::Index>(k)) = v.slopes().row(keep[k]);
        w(static_cast<Eigen::Index>(k)) = nu_w(keep[k]);
    }
    return {DiscreteMeasure(mu_atoms, alpha.weights()), DiscreteMeasure(nu_atoms, w)};
}

ForwardMarginals forward_construct(const AnalyticConvex& v, const DiscreteMeasure& alpha, const QuadratureRule& rule) {
    if (v.dim != alpha.dim() || rule.dim() != v.dim) throw DimensionError("dimensions of v, alpha and rule differ");
    const std::size_t n = alpha.size();
    const std::size_t K = rule.size();
    const auto dd = static_cast<Eigen::Index>(v.dim);
    Mat mu_atoms(static_cast<Eigen::Index>(n), dd);
    parallel_for(n, [&](std::size_t i) {
        mu_atoms.row(static_cast<Eigen::Index>(i)) = gaussian_smooth(v, 1.0, rule, alpha.atom(i)).gradient.transpose();
    });

    const bool full = n * K <= kCloudCap;
    const std::size_t total = full ? n * K : K;
    Mat cloud(static_cast<Eigen::Index>(total), dd);
    Vec cw(static_cast<Eigen::Index>(total));
    if (full) {
        parallel_for(n, [&](std::size_t i) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto row = static_cast<Eigen::Index>(i * K + k);
                const auto kk = static_cast<Eigen::Index>(k);
                cloud.row(row) = v.gradient(alpha.atom(i) + rule.nodes().row(kk).transpose()).transpose();
                cw(row) = alpha.weight(i) * rule.weights()(kk);
            }
        });
    } else {
        // Node k goes to atom k mod n, reweighted within each atom's share.
        Vec share = Vec::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < K; ++k) share(static_cast<Eigen::Index>(k % n)) += rule.weights()(static_cast<Eigen::Index>(k));
        parallel_for(K, [&](std::size_t k) {
            const std::size_t i = k % n;
            const auto kk = static_cast<Eigen::Index>(k);
            cloud.row(kk) = v.gradient(alpha.atom(i) + rule.nodes().row(kk).transpose()).transpose();
            cw(kk) = alpha.weight(i) * rule.weights()(kk) / share(static_cast<Eigen::Index>(i));
        });
    }
    return {DiscreteMeasure(mu_atoms, alpha.weights()), DiscreteMeasure(cloud, cw)};
}

QuadratureRule solution_rule(const BassSolution& sol) {
    if (sol.quadrature.rfind("gh:", 0) == 0 || sol.quadrature.rfind("mc:", 0) == 0)
        return QuadratureRule::parse(sol.quadrature, sol.dim);
    if (sol.dim == 1) return QuadratureRule::gauss_hermite(1, 64);
    return QuadratureRule::default_for(sol.dim, sol.v ? sol.v->pieces() : 1);
}

DiscreteMeasure kernel(const BassSolution& sol, std::size_t x_index) {
    return kernel(sol, x_index, solution_rule(sol));
}

DiscreteMeasure kernel(const BassSolution& sol, std::size_t x_index, const QuadratureRule& rule) {
    if (x_index >= static_cast<std::size_t>(sol.zeta.rows())) {
        std::ostringstream msg;
        msg << "source atom index " << x_index << " out of range (" << sol.zeta.rows() << " atoms)";
        throw IndexError(msg.str());
    }
    const MaxAffine& v = sol.potential();
    const Vec zeta = sol.zeta.row(static_cast<Eigen::Index>(x_index)).transpose();
    Vec m;
    if (v.pieces() == 1) {
        m = Vec::Ones(1);
    } else {
        m = GaussianCellIntegrator(v, rule.with_dim(v.dim())).integrate(zeta).masses;
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < m.size(); ++j)
        if (m(j) > 0.0) keep.push_back(j);
    Mat atoms(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(v.dim()));
    Vec w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        atoms.row(static_cast<Eigen::Index>(k)) = v.slopes().row(keep[k]);
        w(static_cast<Eigen::Index>(k)) = m(keep[k]);
    }
    return DiscreteMeasure(atoms, w);
}

std::size_t PathEnsemble::step_at(double t) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    return best;
}

DiscreteMeasure PathEnsemble::martingale_law(std::size_t k) const {
    if (k >= m.size()) throw IndexError("grid index out of range");
    return DiscreteMeasure::uniform(m[k]);
}

PathEnsemble sample_paths(const MaxAffine& v, const DiscreteMeasure& alpha, const QuadratureRule& rule,
                          std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
    if (v.dim() != alpha.dim()) throw DimensionError("dimensions of v and alpha differ");
    PathEnsemble ens = simulate(max_affine_gradient(v, rule.with_dim(v.dim())), alpha, n_paths, n_steps, seed, true);
    ens.bounded_range = true;
    ens.cell_margins = cell_margins(v);
    return ens;
}

PathEnsemble sample_paths(const AnalyticConvex& v, const DiscreteMeasure& alpha, const QuadratureRule& rule,
                          std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
    if (v.dim != alpha.dim() || rule.dim() != v.dim) throw DimensionError("dimensions of v, alpha and rule differ");
    const GradientMap grad = [&v, &rule](const Vec& b, double var) -> GradientValue {
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        if (var <= 0.0) return {v.gradient(b), nan};
        return {gaussian_smooth(v, var, rule, b).gradient, nan};
    };
    PathEnsemble ens = simulate(grad, alpha, n_paths, n_steps, seed, false);
    ens.bounded_range = v.gradient_bound.has_value();
    return ens;
}

PathEnsemble sample_paths(const BassSolution& sol, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
    const DiscreteMeasure alpha(sol.zeta, sol.alpha_weights);
    if (sol.v) return sample_paths(*sol.v, alpha, solution_rule(sol), n_paths, n_steps, seed);
    if (!sol.profile) throw InvalidMeasureError("solution carries no potential");
    return sample_paths(AnalyticConvex::from_profile(*sol.profile), alpha, QuadratureRule::gauss_hermite(1, 64), n_paths,
                        n_steps, seed);
}

FunctionalEstimates estimate_functionals(const PathEnsemble& ens, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (ens.n_paths == 0) throw InvalidMeasureError("empty path ensemble");
    const double n = static_cast<double>(ens.n_paths);
    auto stats = [n](const Vec& xs, double& m, double& se) {
        m = xs.mean();
        const double var = xs.size() > 1 ? (xs.array() - m).square().sum() / (n - 1.0) : 0.0;
        se = std::sqrt(var / n);
    };
    FunctionalEstimates out;
    stats(ens.cross_variation, out.p_hat, out.p_se);
    stats(ens.relative_variation, out.mt_hat, out.mt_se);
    const double target = static_cast<double>(ens.dim) + moments(nu).second_moment - moments(mu).second_moment;
    out.relation_residual = std::abs(out.mt_hat - (target - 2.0 * out.p_hat));
    double dummy = 0.0;
    stats(ens.relative_variation + 2.0 * ens.cross_variation, dummy, out.relation_se);
    return out;
}

BoundaryReport check_boundary(const PathEnsemble& ens, const DiscreteMeasure& nu) {
    BoundaryReport rep;
    if (!ens.bounded_range) {
        rep.pass = true;
        rep.vacuous = true;
        rep.min_distance = std::numeric_limits<double>::infinity();
        rep.note = "gradient range is unbounded; no boundary to reach";
        return rep;
    }
    if (nu.dim() != ens.dim) throw DimensionError("target and ensemble dimensions differ");
    const std::size_t d = ens.dim;
    const std::size_t K = ens.steps();
    rep.checked = K * ens.n_paths;
    rep.min_distance = std::numeric_limits<double>::infinity();
    std::size_t geometric_violations = 0;

    if (d == 2) {
        const std::vector<Vec> hull = hull_2d(nu.atoms());
        if (hull.size() < 3) {
            rep.min_distance = 0.0;
            geometric_violations = rep.checked;
            rep.note = "target support is degenerate";
        } else {
            // Global minimum over points and edges: for each edge the
            // outermost point lies on the hull of the path values.
            std::size_t total = 0;
            for (std::size_t k = 0; k < K; ++k) total += static_cast<std::size_t>(ens.m[k].rows());
            Mat all(static_cast<Eigen::Index>(total), 2);
            Eigen::Index row = 0;
            for (std::size_t k = 0; k < K; ++k) {
                all.middleRows(row, ens.m[k].rows()) = ens.m[k];
                row += ens.m[k].rows();
            }
            const std::vector<Vec> outer = hull_2d(all);
            const std::size_t H = hull.size();
            for (std::size_t e = 0; e < H; ++e) {
                const Vec& a = hull[e];
                const Vec edge = hull[(e + 1) % H] - a;
                const Vec normal = Vec{{edge(1), -edge(0)}} / edge.norm();
                double reach = -std::numeric_limits<double>::infinity();
                for (const Vec& p : outer) reach = std::max(reach, normal.dot(p - a));
                rep.min_distance = std::min(rep.min_distance, -reach);
            }
            // Strict interiority per point: fan from hull[0] and binary search.
            auto cross = [](const Vec& o, const Vec& p, const Vec& q) {
                return (p(0) - o(0)) * (q(1) - o(1)) - (p(1) - o(1)) * (q(0) - o(0));
            };
            std::vector<std::size_t> bad(K, 0);
            parallel_for(K, [&](std::size_t k) {
                for (Eigen::Index r = 0; r < ens.m[k].rows(); ++r) {
                    const Vec p = ens.m[k].row(r).transpose();
                    bool inside = cross(hull[0], hull[1], p) > 0.0 && cross(hull[0], hull[H - 1], p) < 0.0;
                    if (inside) {
                        std::size_t lo = 1, hi = H - 1;
                        while (hi - lo > 1) {
                            const std::size_t mid = (lo + hi) / 2;
                            if (cross(hull[0], hull[mid], p) > 0.0) lo = mid;
                            else hi = mid;
                        }
                        inside = cross(hull[lo], hull[lo + 1], p) > 0.0;
                    }
                    if (!inside) ++bad[k];
                }
            });
            for (std::size_t b : bad) geometric_violations += b;
        }
    } else {
        std::function<double(const Vec&)> distance;
        if (d == 1) {
            const double lo = nu.atoms().col(0).minCoeff(), hi = nu.atoms().col(0).maxCoeff();
            distance = [lo, hi](const Vec& p) { return std::min(p(0) - lo, hi - p(0)); };
        } else {
            distance = [&nu](const Vec& p) { return lp_depth(nu.atoms(), p); };
        }
        std::vector<double> per_step(K, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> bad(K, 0);
        parallel_for(K, [&](std::size_t k) {
            for (Eigen::Index p = 0; p < ens.m[k].rows(); ++p) {
                const double dist = distance(ens.m[k].row(p).transpose());
                per_step[k] = std::min(per_step[k], dist);
                if (!(dist > 0.0)) ++bad[k];
            }
        });
        for (std::size_t k = 0; k < K; ++k) {
            rep.min_distance = std::min(rep.min_distance, per_step[k]);
            geometric_violations += bad[k];
        }
    }

    if (ens.cell_margins.size() > 0 && affine_hull(nu.atoms()).rank() == d) {
        // Exact: every cell has interior, so every slope carries positive
        // kernel mass at t < 1 and M_t is interior even where rounding puts it
        // on the boundary numerically.
        const double scale = 1e-12 * (1.0 + nu.atoms().cwiseAbs().maxCoeff());
        rep.mass_certificate = true;
        rep.violations = ens.cell_margins.minCoeff() > scale ? 0 : rep.checked;
        rep.note = rep.violations == 0 ? "interiority certified: every cell of v has interior"
                                       : "some cell of v is empty; its slope is never charged";
    } else {
        rep.violations = geometric_violations;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

MartingaleReport check_martingale(const PathEnsemble& ens) {
    MartingaleReport rep;
    const std::size_t n = ens.n_paths;
    const std::size_t K = ens.steps();
    const std::size_t half = ens.step_at(0.5);
    constexpr std::size_t kBins = 10;
    rep.pass = true;
    auto record = [&rep](DriftTest t) {
        t.pass = t.statistic < t.threshold;
        rep.pass = rep.pass && t.pass;
        const double ratio = t.threshold > 0.0 ? t.statistic / t.threshold : (t.statistic > 0.0 ? 1e300 : 0.0);
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        rep.tests.push_back(t);
    };
    for (std::size_t c = 0; c < ens.dim; ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        std::vector<double> drift(n);
        for (std::size_t p = 0; p < n; ++p) {
            const auto pp = static_cast<Eigen::Index>(p);
            drift[p] = ens.m[K](pp, cc) - ens.m[0](pp, cc);
        }
        DriftTest overall;
        overall.coordinate = c;
        overall.statistic = std::abs(mean(drift));
        overall.threshold = 3.0 * sample_sd(drift) / std::sqrt(static_cast<double>(n));
        record(overall);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ens.m[half](static_cast<Eigen::Index>(a), cc) < ens.m[half](static_cast<Eigen::Index>(b), cc);
        });
        for (std::size_t bin = 0; bin < kBins; ++bin) {
            const std::size_t lo = bin * n / kBins, hi = (bin + 1) * n / kBins;
            if (hi <= lo) continue;
            std::vector<double> cond;
            cond.reserve(hi - lo);
            for (std::size_t r = lo; r < hi; ++r) {
                const auto pp = static_cast<Eigen::Index>(order[r]);
                cond.push_back(ens.m[K](pp, cc) - ens.m[half](pp, cc));
            }
            DriftTest t;
            t.coordinate = c;
            t.bin = static_cast<int>(bin);
            t.statistic = std::abs(mean(cond));
            t.threshold = 4.0 * sample_sd(cond) / std::sqrt(static_cast<double>(cond.size()));
            record(t);
        }
    }
    return rep;
}

TimeConsistencyReport time_consistency_diagnostic(const PathEnsemble& ens, const DiscreteMeasure& nu, std::size_t bins,
                                                  double z_tolerance) {
    if (ens.dim != 1 || nu.dim() != 1) throw DimensionError("time-consistency diagnostic is one-dimensional");
    if (bins < 2 || ens.n_paths < 10 * bins) throw InvalidMeasureError("too few paths for the requested bins");
    TimeConsistencyReport rep;
    rep.bins = bins;
    const std::size_t n = ens.n_paths;
    const std::size_t K = ens.steps();
    const std::size_t half = ens.step_at(0.5);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ens.m[half](static_cast<Eigen::Index>(a), 0) < ens.m[half](static_cast<Eigen::Index>(b), 0);
    });

    const auto J = static_cast<Eigen::Index>(nu.size());
    Mat freq = Mat::Zero(static_cast<Eigen::Index>(bins), J);
    Mat atoms(static_cast<Eigen::Index>(bins), 1);
    Vec counts(static_cast<Eigen::Index>(bins));
    for (std::size_t bin = 0; bin < bins; ++bin) {
        const std::size_t lo = bin * n / bins, hi = (bin + 1) * n / bins;
        double s = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
            const auto pp = static_cast<Eigen::Index>(order[r]);
            s += ens.m[half](pp, 0);
            const double y = ens.m[K](pp, 0);
            Eigen::Index j = 0;
            (nu.atoms().col(0).array() - y).abs().minCoeff(&j);
            freq(static_cast<Eigen::Index>(bin), j) += 1.0;
        }
        const auto cnt = static_cast<double>(hi - lo);
        atoms(static_cast<Eigen::Index>(bin), 0) = s / cnt;
        counts(static_cast<Eigen::Index>(bin)) = cnt;
        freq.row(static_cast<Eigen::Index>(bin)) /= cnt;
    }
    // Re-center so the binned law has the target mean exactly.
    const double target_mean = nu.weights().dot(nu.atoms().col(0));
    atoms.array() += target_mean - counts.dot(atoms.col(0)) / counts.sum();

    BassSolution resolved;
    try {
        resolved = solve_bass_1d(DiscreteMeasure(atoms, counts), nu);
    } catch (const Error& e) {
        rep.note = std::string("re-solve from the binned law failed: ") + e.what();
        return rep;
    }
    const MaxAffine& v = resolved.potential();
    const GaussianCellIntegrator integ(v, QuadratureRule::gauss_hermite(1, 2));
    for (std::size_t bin = 0; bin < bins; ++bin) {
        const auto bb = static_cast<Eigen::Index>(bin);
        const Vec m = integ.integrate(resolved.zeta.row(bb).transpose()).masses;
        for (Eigen::Index j = 0; j < J; ++j) {
            const double p = m(j);
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / counts(bb));
            rep.max_z = std::max(rep.max_z, std::abs(freq(bb, j) - p) / se);
        }
    }
    rep.pass = rep.max_z <= z_tolerance;
    return rep;
}

}  // namespace bassmt
