#include "bassmt/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "bassmt/errors.hpp"
#include "bassmt/lp.hpp"
#include "bassmt/normal.hpp"

namespace bassmt {

DiscreteMeasure::DiscreteMeasure(Mat atoms, Vec weights) {
    if (atoms.rows() == 0) throw InvalidMeasureError("measure must have at least one atom");
    if (atoms.cols() == 0) throw InvalidMeasureError("measure dimension must be positive");
    if (atoms.rows() != weights.size())
        throw InvalidMeasureError("atom and weight counts differ");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights(i) > 0.0) || !std::isfinite(weights(i)))
            throw InvalidMeasureError("weights must be strictly positive and finite");
        if (!atoms.row(i).allFinite()) throw InvalidMeasureError("atoms must be finite");
    }

    std::map<std::vector<double>, Eigen::Index> seen;
    std::vector<Eigen::Index> keep;
    std::vector<double> merged;
    for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
        std::vector<double> key(static_cast<std::size_t>(atoms.cols()));
        for (Eigen::Index c = 0; c < atoms.cols(); ++c) key[static_cast<std::size_t>(c)] = atoms(i, c);
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(keep.size()));
        if (inserted) {
            keep.push_back(i);
            merged.push_back(weights(i));
        } else {
            merged[static_cast<std::size_t>(it->second)] += weights(i);
        }
    }

    const double total = std::accumulate(merged.begin(), merged.end(), 0.0);
    atoms_.resize(static_cast<Eigen::Index>(keep.size()), atoms.cols());
    weights_.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        atoms_.row(static_cast<Eigen::Index>(k)) = atoms.row(keep[k]);
        weights_(static_cast<Eigen::Index>(k)) = merged[k] / total;
    }
}

DiscreteMeasure DiscreteMeasure::dirac(const Vec& point) {
    return DiscreteMeasure(point.transpose(), Vec::Ones(1));
}

DiscreteMeasure DiscreteMeasure::uniform(Mat atoms) {
    const auto n = atoms.rows();
    return DiscreteMeasure(std::move(atoms), Vec::Ones(n));
}

DiscreteMeasure DiscreteMeasure::on_line(const std::vector<double>& atoms, const std::vector<double>& weights) {
    if (atoms.size() != weights.size()) throw InvalidMeasureError("atom and weight counts differ");
    Mat a(static_cast<Eigen::Index>(atoms.size()), 1);
    Vec w(static_cast<Eigen::Index>(weights.size()));
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        a(static_cast<Eigen::Index>(i), 0) = atoms[i];
        w(static_cast<Eigen::Index>(i)) = weights[i];
    }
    return DiscreteMeasure(std::move(a), std::move(w));
}

std::optional<std::size_t> DiscreteMeasure::find(const Vec& point) const {
    if (static_cast<std::size_t>(point.size()) != dim()) return std::nullopt;
    for (std::size_t i = 0; i < size(); ++i)
        if (atoms_.row(static_cast<Eigen::Index>(i)).transpose() == point) return i;
    return std::nullopt;
}

Moments moments(const DiscreteMeasure& m) {
    Moments out;
    out.barycenter = m.atoms().transpose() * m.weights();
    out.second_moment = m.weights().dot(m.atoms().rowwise().squaredNorm());
    return out;
}

double MartingaleCoupling::max_residual() const {
    double r = 0.0;
    const Vec rows = matrix.rowwise().sum();
    const Vec cols = matrix.colwise().sum().transpose();
    r = std::max(r, (rows - source.weights()).cwiseAbs().maxCoeff());
    r = std::max(r, (cols - target.weights()).cwiseAbs().maxCoeff());
    const Mat bary = matrix * target.atoms();  // n x d
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Vec diff = bary.row(ii).transpose() - source.weight(i) * source.atom(i);
        r = std::max(r, diff.cwiseAbs().maxCoeff());
    }
    r = std::max(r, std::max(0.0, -matrix.minCoeff()));
    return r;
}

DiscreteMeasure MartingaleCoupling::row_kernel(std::size_t i) const {
    const Vec row = matrix.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) > 0.0) support.push_back(j);
    Mat atoms(static_cast<Eigen::Index>(support.size()), static_cast<Eigen::Index>(target.dim()));
    Vec w(static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        atoms.row(static_cast<Eigen::Index>(k)) = target.atoms().row(support[k]);
        w(static_cast<Eigen::Index>(k)) = row(support[k]);
    }
    return DiscreteMeasure(std::move(atoms), std::move(w));
}

namespace {

void require_dim1(const DiscreteMeasure& m, const char* what) {
    if (m.dim() != 1) throw DimensionError(std::string(what) + " requires one-dimensional measures");
}

void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim() != b.dim()) throw DimensionError("measures have different dimensions");
}

std::vector<std::pair<double, double>> sorted_line(const DiscreteMeasure& m) {
    std::vector<std::pair<double, double>> v(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) v[i] = {m.atoms()(static_cast<Eigen::Index>(i), 0), m.weight(i)};
    std::sort(v.begin(), v.end());
    return v;
}

// Row/column/barycenter constraints of MT(mu, nu); variable (i, j) sits at
// column i * m + j.
lp::LinearProgram coupling_program(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const auto n = static_cast<Eigen::Index>(mu.size());
    const auto m = static_cast<Eigen::Index>(nu.size());
    const auto d = static_cast<Eigen::Index>(mu.dim());
    lp::LinearProgram p;
    p.A = Mat::Zero(n + m + n * d, n * m);
    p.b = Vec::Zero(n + m + n * d);
    p.c = Vec::Zero(n * m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::Index k = i * m + j;
            p.A(i, k) = 1.0;
            p.A(n + j, k) = 1.0;
            for (Eigen::Index c = 0; c < d; ++c)
                p.A(n + m + i * d + c, k) = nu.atoms()(j, c) - mu.atoms()(i, c);
        }
        p.b(i) = mu.weights()(i);
    }
    for (Eigen::Index j = 0; j < m; ++j) p.b(n + j) = nu.weights()(j);
    return p;
}

Mat to_matrix(const Vec& x, std::size_t n, std::size_t m) {
    Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::max(0.0, x(static_cast<Eigen::Index>(i * m + j)));
    return out;
}

}  // namespace

std::vector<QuantilePair> comonotone_coupling(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    require_dim1(p, "comonotone coupling");
    require_dim1(q, "comonotone coupling");
    const auto a = sorted_line(p);
    const auto b = sorted_line(q);
    std::vector<QuantilePair> out;
    std::size_t i = 0, j = 0;
    double ra = a[0].second, rb = b[0].second;
    while (i < a.size() && j < b.size()) {
        const double mass = std::min(ra, rb);
        if (mass > 0.0) out.push_back({a[i].first, b[j].first, mass});
        ra -= mass;
        rb -= mass;
        // Advance whichever side is exhausted; rounding leftovers stay on
        // the last atom of each side.
        if (ra <= 0.0 && i + 1 < a.size()) { ++i; ra += a[i].second; }
        else if (rb <= 0.0 && j + 1 < b.size()) { ++j; rb += b[j].second; }
        else if (ra <= 0.0 || rb <= 0.0) break;
    }
    return out;
}

double wasserstein2_1d(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    double s = 0.0;
    for (const auto& pr : comonotone_coupling(p, q)) s += pr.mass * (pr.x - pr.y) * (pr.x - pr.y);
    return std::sqrt(std::max(0.0, s));
}

bool check_convex_order_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    require_dim1(mu, "potential-function convex order check");
    require_dim1(nu, "potential-function convex order check");
    const double mean_mu = mu.weights().dot(mu.atoms().col(0));
    const double mean_nu = nu.weights().dot(nu.atoms().col(0));
    const double scale = 1.0 + mu.atoms().cwiseAbs().maxCoeff() + nu.atoms().cwiseAbs().maxCoeff();
    if (std::abs(mean_mu - mean_nu) > kFeasibilityTol * scale) return false;
    auto potential = [](const DiscreteMeasure& m, double k) {
        return m.weights().dot((m.atoms().col(0).array() - k).abs().matrix());
    };
    for (const auto* m : {&mu, &nu})
        for (Eigen::Index i = 0; i < m->atoms().rows(); ++i) {
            const double k = m->atoms()(i, 0);
            if (potential(mu, k) > potential(nu, k) + kFeasibilityTol * scale) return false;
        }
    return true;
}

bool check_convex_order_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    require_same_dim(mu, nu);
    return lp::solve(coupling_program(mu, nu)).status != lp::Status::Infeasible;
}

bool check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    require_same_dim(mu, nu);
    if (mu.dim() == 1) return check_convex_order_1d(mu, nu);
    return check_convex_order_lp(mu, nu);
}

MartingaleCoupling find_mt_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    std::optional<AtomPair> promote) {
    require_same_dim(mu, nu);
    auto program = coupling_program(mu, nu);
    if (promote) {
        if (promote->first >= mu.size() || promote->second >= nu.size())
            throw IndexError("promoted atom pair out of range");
        program.c(static_cast<Eigen::Index>(promote->first * nu.size() + promote->second)) = -1.0;
    }
    const auto res = lp::solve(program);
    if (res.status == lp::Status::Infeasible || res.status == lp::Status::IterationLimit) {
        const Vec diff = moments(mu).barycenter - moments(nu).barycenter;
        std::ostringstream msg;
        if (diff.cwiseAbs().maxCoeff() > kFeasibilityTol * (1.0 + diff.norm()))
            msg << "no martingale coupling: barycenters differ by " << diff.norm();
        else
            msg << "no martingale coupling: row/column/barycenter constraints infeasible "
                << "(phase-one residual " << res.infeasibility << ")";
        throw InfeasibleError(msg.str());
    }
    return MartingaleCoupling{mu, nu, to_matrix(res.x, mu.size(), nu.size())};
}

IrreducibilityReport check_irreducible(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    IrreducibilityReport report;
    const auto first = find_mt_coupling(mu, nu);
    report.lp_solves = 1;
    if (mu.size() == 1) {
        // Every coupling is the product coupling, which charges every pair.
        report.irreducible = true;
        return report;
    }
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> charged = first.matrix.array() > kChargeTol;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < nu.size(); ++j) {
            if (charged(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) continue;
            const auto pi = find_mt_coupling(mu, nu, AtomPair{i, j});
            ++report.lp_solves;
            if (pi.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= kChargeTol) {
                report.irreducible = false;
                report.witness = AtomPair{i, j};
                return report;
            }
            charged = charged || (pi.matrix.array() > kChargeTol);
        }
    }
    report.irreducible = true;
    return report;
}

double mixture_cdf(const DiscreteMeasure& alpha, double z, double t) {
    const double s = std::sqrt(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        acc += alpha.weight(i) * normal::cdf((z - alpha.atoms()(static_cast<Eigen::Index>(i), 0)) / s);
    return acc;
}

double mixture_sf(const DiscreteMeasure& alpha, double z, double t) {
    const double s = std::sqrt(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        acc += alpha.weight(i) * normal::sf((z - alpha.atoms()(static_cast<Eigen::Index>(i), 0)) / s);
    return acc;
}

double mixture_quantile(const DiscreteMeasure& alpha, double p, double t, bool upper) {
    require_dim1(alpha, "mixture quantile");
    if (p <= 0.0) return upper ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return upper ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    const double s = std::sqrt(t);
    // Bracket from the component quantiles: the mixture quantile lies between
    // the smallest and largest component quantile at the same level.
    const double zq = upper ? -normal::quantile(p) : normal::quantile(p);
    double lo = alpha.atoms().col(0).minCoeff() + s * zq - 1e-9;
    double hi = alpha.atoms().col(0).maxCoeff() + s * zq + 1e-9;
    auto f = [&](double z) { return upper ? p - mixture_sf(alpha, z, t) : mixture_cdf(alpha, z, t) - p; };
    double flo = f(lo), fhi = f(hi);
    for (int k = 0; flo > 0.0 && k < 60; ++k) { lo -= s * (1 << std::min(k, 20)); flo = f(lo); }
    for (int k = 0; fhi < 0.0 && k < 60; ++k) { hi += s * (1 << std::min(k, 20)); fhi = f(hi); }
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

QuantileFunction monotone_pushforward(std::function<double(double)> g, DiscreteMeasure alpha) {
    require_dim1(alpha, "monotone pushforward");
    return QuantileFunction{[g = std::move(g), alpha = std::move(alpha)](double u) {
        const double z = u <= 0.5 ? mixture_quantile(alpha, u) : mixture_quantile(alpha, 1.0 - u, 1.0, true);
        return g(z);
    }};
}

DiscreteMeasure discretize_quantile(const QuantileFunction& q, std::size_t n) {
    if (n == 0) throw InvalidMeasureError("discretization needs at least one atom");
    std::vector<double> atoms(n), weights(n, 1.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) atoms[k] = q.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
    return DiscreteMeasure::on_line(atoms, weights);
}

}  // namespace bassmt
