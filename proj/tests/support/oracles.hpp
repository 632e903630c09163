#pragma once
// Reference values computed without the library: closed forms, brute force
// and textbook formulas. Test code compares the library against these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace oracle {

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double Phi_inv(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

// E|x + sqrt(t) Z|.
inline double smoothed_abs(double x, double t) {
    const double s = std::sqrt(t);
    return x * (2.0 * Phi(x / s) - 1.0) + 2.0 * s * phi(x / s);
}

// Derivative of smoothed_abs in x.
inline double smoothed_abs_grad(double x, double t) { return 2.0 * Phi(x / std::sqrt(t)) - 1.0; }

struct Atom {
    double x;
    double w;
};

// One-dimensional max-affine v(z) = max_j (a_j z - c_j), handled by brute
// force: the active piece on a fine interval partition.
struct Pieces1d {
    std::vector<double> a;
    std::vector<double> c;
    double value(double z) const {
        double best = -INFINITY;
        for (std::size_t j = 0; j < a.size(); ++j) best = std::max(best, a[j] * z - c[j]);
        return best;
    }
    std::size_t active(double z) const {
        std::size_t best = 0;
        for (std::size_t j = 1; j < a.size(); ++j)
            if (a[j] * z - c[j] > a[best] * z - c[best]) best = j;
        return best;
    }
    // Breakpoints of the upper envelope and the piece active between them,
    // found from the pairwise intersections (no sorting tricks).
    void cells(std::vector<double>& left, std::vector<double>& right, std::vector<std::size_t>& piece) const {
        std::vector<double> cuts{-INFINITY, INFINITY};
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = i + 1; j < a.size(); ++j) cuts.push_back((c[j] - c[i]) / (a[j] - a[i]));
        std::sort(cuts.begin(), cuts.end());
        left.clear();
        right.clear();
        piece.clear();
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double lo = cuts[k], hi = cuts[k + 1];
            if (!(hi > lo)) continue;
            double mid;
            if (std::isinf(lo) && std::isinf(hi)) mid = 0.0;
            else if (std::isinf(lo)) mid = hi - 1.0;
            else if (std::isinf(hi)) mid = lo + 1.0;
            else mid = 0.5 * (lo + hi);
            left.push_back(lo);
            right.push_back(hi);
            piece.push_back(active(mid));
        }
    }
    // Cell masses under N(zeta, 1).
    std::vector<double> masses(double zeta) const {
        std::vector<double> l, r, m(a.size(), 0.0);
        std::vector<std::size_t> p;
        cells(l, r, p);
        for (std::size_t k = 0; k < p.size(); ++k) m[p[k]] += Phi(r[k] - zeta) - Phi(l[k] - zeta);
        return m;
    }
    // E v(Z), Z ~ N(0, 1), cell by cell.
    double gaussian_mean() const {
        std::vector<double> l, r;
        std::vector<std::size_t> p;
        cells(l, r, p);
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double pl = std::isinf(l[k]) ? 0.0 : phi(l[k]);
            const double pr = std::isinf(r[k]) ? 0.0 : phi(r[k]);
            s += a[p[k]] * (pl - pr) - c[p[k]] * (Phi(r[k]) - Phi(l[k]));
        }
        return s;
    }
    // E[v'(Z) Z] = sum over cells a_j (phi(l) - phi(r)).
    double gaussian_mcov() const {
        std::vector<double> l, r;
        std::vector<std::size_t> p;
        cells(l, r, p);
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double pl = std::isinf(l[k]) ? 0.0 : phi(l[k]);
            const double pr = std::isinf(r[k]) ? 0.0 : phi(r[k]);
            s += a[p[k]] * (pl - pr);
        }
        return s;
    }
    // v*(y) by a dense scan of x plus every pairwise intersection point; for
    // y inside the slope range the supremum sits at one of the latter.
    double conjugate_scan(double y, double lo = -50.0, double hi = 50.0, int n = 200001) const {
        double best = -INFINITY;
        for (int k = 0; k < n; ++k) {
            const double x = lo + (hi - lo) * k / (n - 1);
            best = std::max(best, x * y - value(x));
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = i + 1; j < a.size(); ++j) {
                if (a[i] == a[j]) continue;
                const double x = (c[j] - c[i]) / (a[j] - a[i]);
                best = std::max(best, x * y - value(x));
            }
        return best;
    }
};

// MCov of a discrete measure on the line with the standard Gaussian: the
// comonotone coupling integrates Phi^{-1} over each quantile block in
// closed form, int_{u0}^{u1} Phi^{-1}(u) du = phi(Phi^{-1}(u0)) - phi(Phi^{-1}(u1)).
inline double mcov_with_gaussian(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& p, const Atom& q) { return p.x < q.x; });
    double total = 0.0;
    for (const auto& at : atoms) total += at.w;
    double u0 = 0.0, s = 0.0;
    for (const auto& at : atoms) {
        const double u1 = std::min(1.0, u0 + at.w / total);
        const double p0 = u0 <= 0.0 ? 0.0 : phi(Phi_inv(u0));
        const double p1 = u1 >= 1.0 ? 0.0 : phi(Phi_inv(u1));
        s += at.x * (p0 - p1);
        u0 = u1;
    }
    return s;
}

// Max over all pairings of two equally weighted samples of the same size.
inline double mcov_bruteforce(std::vector<double> x, std::vector<double> y) {
    std::vector<std::size_t> perm(y.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = -INFINITY;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[perm[i]];
        best = std::max(best, s / static_cast<double>(x.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double call_potential(const std::vector<Atom>& m, double k) {
    double s = 0.0;
    for (const auto& at : m) s += at.w * std::abs(at.x - k);
    return s;
}

// Irreducibility of a pair of discrete measures on the line in convex order:
// the potential functions must separate strictly on the open hull of the
// target (checked at every kink, where the piecewise linear difference has
// its minima), and no source atom may sit on the hull boundary.
inline bool irreducible_1d(const std::vector<Atom>& mu, const std::vector<Atom>& nu) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& at : nu) {
        lo = std::min(lo, at.x);
        hi = std::max(hi, at.x);
    }
    if (hi - lo < 1e-12) return true;
    for (const auto& at : mu)
        if (at.x <= lo + 1e-12 || at.x >= hi - 1e-12) return false;
    std::vector<double> kinks;
    for (const auto& at : mu) kinks.push_back(at.x);
    for (const auto& at : nu) kinks.push_back(at.x);
    for (double k : kinks) {
        if (k <= lo + 1e-12 || k >= hi - 1e-12) continue;
        if (call_potential(nu, k) - call_potential(mu, k) <= 1e-10) return false;
    }
    return true;
}

// Fraction of the mass of |x + sqrt(t) Z| (x in R^d, |x| = r) below k:
// |x + Z|^2 is noncentral chi-square with d degrees of freedom and
// noncentrality r^2.
inline double radial_cdf(std::size_t d, double r, double k) {
    boost::math::non_central_chi_squared dist(static_cast<double>(d), r * r);
    return boost::math::cdf(dist, k * k);
}

// Radial component of E[grad h(|x + Z|)] in the plane for the two-slope
// profile h (slope `inner` below `kink`, `outer` above), |x| = rho.
// Polar coordinates around the origin: trapezoid rule in the angle and
// Gauss-Legendre panels in the radius, split at the kink.
inline double radial_mean_gradient(double rho, double inner, double outer, double kink) {
    static const double gl_x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                   0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static const double gl_w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066708454111, 0.3626837833783620,
                                   0.3626837833783620, 0.3137066708454111, 0.2223810344533745, 0.1012285362903763};
    const int n_theta = 512;
    const double r_max = rho + 12.0;
    auto panel_sum = [&](double a, double b, int panels) {
        double s = 0.0;
        const double hstep = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = a + p * hstep;
            for (int g = 0; g < 8; ++g) {
                const double r = lo + 0.5 * hstep * (gl_x[g] + 1.0);
                const double slope = r < kink ? inner : outer;
                double ang = 0.0;
                for (int k = 0; k < n_theta; ++k) {
                    const double th = 2.0 * std::numbers::pi * k / n_theta;
                    const double d2 = r * r + rho * rho - 2.0 * r * rho * std::cos(th);
                    ang += std::cos(th) * std::exp(-0.5 * d2);
                }
                ang *= 2.0 * std::numbers::pi / n_theta;
                s += 0.5 * hstep * gl_w[g] * slope * r * ang / (2.0 * std::numbers::pi);
            }
        }
        return s;
    };
    return panel_sum(0.0, kink, 200) + panel_sum(kink, r_max, 400);
}

inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace oracle
