#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bassmt/convexfn.hpp"
#include "bassmt/errors.hpp"
#include "bassmt/normal.hpp"

namespace bassmt {

namespace {

// Smallest |<a_i - a_j, u>| / |a_i - a_j| over all slope pairs.
double separation(const Mat& slopes, const Vec& u) {
    double worst = std::numeric_limits<double>::infinity();
    const Vec proj = slopes * u;
    for (Eigen::Index i = 0; i < slopes.rows(); ++i)
        for (Eigen::Index j = i + 1; j < slopes.rows(); ++j) {
            const double dist = (slopes.row(i) - slopes.row(j)).norm();
            worst = std::min(worst, std::abs(proj(i) - proj(j)) / dist);
        }
    return worst;
}

constexpr std::size_t kMaxPiecewisePieces = 64;
constexpr double kTruncation = 9.0;
// Widest Gauss-Legendre panel along the perpendicular axis, in standard units.
constexpr double kPanelWidth = 1.0;

// Golub-Welsch for the Legendre weight on [-1, 1].
void gauss_legendre(std::size_t n, Vec& nodes, Vec& weights) {
    const auto m = static_cast<Eigen::Index>(n);
    Mat jacobi = Mat::Zero(m, m);
    for (Eigen::Index k = 1; k < m; ++k) {
        const double kk = static_cast<double>(k);
        const double b = kk / std::sqrt(4.0 * kk * kk - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
    nodes = eig.eigenvalues();
    weights = 2.0 * eig.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

GaussianCellIntegrator::GaussianCellIntegrator(const MaxAffine& v, const QuadratureRule& rule)
    : v_(v), perp_rule_(rule.drop_leading_axis()) {
    if (rule.dim() != v.dim()) throw QuadratureError("quadrature dimension does not match the function");
    const auto d = static_cast<Eigen::Index>(v.dim());
    if (d == 1) {
        u_ = Vec::Ones(1);
        perp_ = Mat::Zero(1, 0);
    } else {
        // Pick the most separating of a few fixed pseudo-random directions.
        std::mt19937_64 rng(0x5eed);
        std::normal_distribution<double> gauss;
        double best = -1.0;
        for (int k = 0; k < 8; ++k) {
            Vec cand(d);
            for (Eigen::Index c = 0; c < d; ++c) cand(c) = gauss(rng);
            cand.normalize();
            const double sep = v.pieces() > 1 ? separation(v.slopes(), cand) : 1.0;
            if (sep > best) {
                best = sep;
                u_ = cand;
            }
        }
        const Mat um = u_;
        Eigen::HouseholderQR<Mat> qr(um);
        const Mat q = qr.householderQ() * Mat::Identity(d, d);
        u_ = q.col(0);
        perp_ = q.rightCols(d - 1);
    }
    sigma_ = v_.slopes() * u_;
    order_.resize(v_.pieces());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return sigma_(static_cast<Eigen::Index>(a)) < sigma_(static_cast<Eigen::Index>(b));
    });
    sigma_tie_ = 1e-13 * (1.0 + sigma_.cwiseAbs().maxCoeff());
    if (d == 2 && rule.kind() == QuadratureKind::GaussHermite && v_.pieces() <= kMaxPiecewisePieces) {
        piecewise_ = true;
        gauss_legendre(std::min<std::size_t>(rule.points_per_axis(), 12), legendre_nodes_, legendre_weights_);
        find_vertices();
    }
}

void GaussianCellIntegrator::set_intercepts(const Vec& intercepts) {
    v_ = v_.with_intercepts(intercepts);
    if (piecewise_) find_vertices();
}

// Points where three or more pieces tie at the top of the envelope.
void GaussianCellIntegrator::find_vertices() {
    const Mat& a = v_.slopes();
    const Vec& c = v_.intercepts();
    const auto J = a.rows();
    const double scale = 1.0 + a.cwiseAbs().maxCoeff() + c.cwiseAbs().maxCoeff();
    std::vector<double> offsets;
    for (Eigen::Index i = 0; i < J; ++i)
        for (Eigen::Index j = i + 1; j < J; ++j)
            for (Eigen::Index k = j + 1; k < J; ++k) {
                Eigen::Matrix2d m;
                m.row(0) = a.row(i) - a.row(j);
                m.row(1) = a.row(i) - a.row(k);
                const double det = m.determinant();
                if (std::abs(det) < 1e-12 * scale * scale) continue;
                const Eigen::Vector2d rhs(c(i) - c(j), c(i) - c(k));
                const Vec z = m.inverse() * rhs;
                const double top = a.row(i).dot(z) - c(i);
                const double best = (a * z - c).maxCoeff();
                if (best > top + 1e-10 * scale * (1.0 + z.norm())) continue;
                offsets.push_back(perp_.col(0).dot(z));
            }
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    vertex_offsets_ = Eigen::Map<const Vec>(offsets.data(), static_cast<Eigen::Index>(offsets.size()));
}

template <class Visit>
void GaussianCellIntegrator::perpendicular_nodes(const Vec& zeta, double s, Visit&& visit) const {
    if (!piecewise_) {
        const Mat& nodes = perp_rule_.nodes();
        for (std::size_t k = 0; k < perp_rule_.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            Vec w = nodes.row(kk).transpose();
            visit(w, perp_rule_.weights()(kk));
        }
        return;
    }
    // Kinks of the integrand in standard units along the perpendicular axis.
    const double base = perp_.col(0).dot(zeta);
    std::vector<double> cuts{-kTruncation};
    for (Eigen::Index k = 0; k < vertex_offsets_.size(); ++k) {
        const double w = (vertex_offsets_(k) - base) / s;
        if (w > -kTruncation && w < kTruncation) cuts.push_back(w);
    }
    cuts.push_back(kTruncation);
    Vec w(1);
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double width = cuts[seg + 1] - cuts[seg];
        if (!(width > 0.0)) continue;
        const int panels = std::max(1, static_cast<int>(std::ceil(width / kPanelWidth)));
        const double half = 0.5 * width / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = cuts[seg] + (2 * p + 1) * half;
            for (Eigen::Index g = 0; g < legendre_nodes_.size(); ++g) {
                w(0) = mid + half * legendre_nodes_(g);
                visit(w, half * legendre_weights_(g) * normal::pdf(w(0)));
            }
        }
    }
}

GaussianCellIntegrator::Stats GaussianCellIntegrator::integrate(const Vec& zeta, double t) const {
    if (static_cast<std::size_t>(zeta.size()) != v_.dim()) throw DimensionError("point dimension mismatch");
    if (!(t > 0.0)) throw QuadratureError("smoothing variance must be positive");
    const double s = std::sqrt(t);
    const std::size_t J = v_.pieces();
    constexpr double inf = std::numeric_limits<double>::infinity();

    Stats out;
    out.masses = Vec::Zero(static_cast<Eigen::Index>(J));
    std::vector<std::size_t> hull;
    hull.reserve(J);
    Vec beta(static_cast<Eigen::Index>(J));

    perpendicular_nodes(zeta, s, [&](const Vec& w, double omega) {
        Vec offset = Vec::Zero(zeta.size());
        if (perp_.cols() > 0) offset = s * (perp_ * w);
        const Vec base = zeta + offset;
        beta = v_.slopes() * base - v_.intercepts();

        // Upper envelope of r |-> beta_j + sigma_j r, lines sorted by slope.
        hull.clear();
        for (const std::size_t j : order_) {
            const auto jj = static_cast<Eigen::Index>(j);
            if (!hull.empty()) {
                const auto top = static_cast<Eigen::Index>(hull.back());
                if (sigma_(jj) - sigma_(top) <= sigma_tie_) {
                    if (beta(jj) > beta(top)) {
                        hull.pop_back();
                    } else {
                        continue;
                    }
                }
            }
            while (hull.size() >= 2) {
                const auto a = static_cast<Eigen::Index>(hull[hull.size() - 2]);
                const auto b = static_cast<Eigen::Index>(hull.back());
                const double x_ab = (beta(a) - beta(b)) / (sigma_(b) - sigma_(a));
                const double x_aj = (beta(a) - beta(jj)) / (sigma_(jj) - sigma_(a));
                if (x_aj <= x_ab) hull.pop_back();
                else break;
            }
            hull.push_back(j);
        }

        double lo = -inf;
        for (std::size_t h = 0; h < hull.size(); ++h) {
            const auto j = static_cast<Eigen::Index>(hull[h]);
            double hi = inf;
            if (h + 1 < hull.size()) {
                const auto n = static_cast<Eigen::Index>(hull[h + 1]);
                hi = (beta(j) - beta(n)) / (sigma_(n) - sigma_(j)) / s;
            }
            const double mass = normal::interval_mass(lo, hi);
            const double first = normal::pdf(lo) - normal::pdf(hi);  // E[S 1{lo < S < hi}]
            out.masses(j) += omega * mass;
            out.value += omega * (beta(j) * mass + sigma_(j) * s * first);
            double along_perp = 0.0;
            if (perp_.cols() > 0) along_perp = v_.slopes().row(j).dot(offset) / s;
            out.mcov += omega * (sigma_(j) * first + along_perp * mass);
            lo = hi;
        }
    });
    out.gradient = v_.slopes().transpose() * out.masses;
    return out;
}

}  // namespace bassmt
