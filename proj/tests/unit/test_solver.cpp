#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bassmt/convexfn.hpp"
#include "bassmt/errors.hpp"
#include "bassmt/martingale.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/solver.hpp"
#include "bassmt/transport.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace bassmt;
using testing_support::col1;
using testing_support::rows2;
using testing_support::vec1;
using testing_support::vec2;

namespace {

const double kRoot = std::sqrt(2.0 / std::numbers::pi);

DiscreteMeasure origin(std::size_t d = 1) { return DiscreteMeasure::dirac(Vec::Zero(static_cast<Eigen::Index>(d))); }
DiscreteMeasure binary_nu() { return DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5}); }

DiscreteMeasure gaussian_atoms(std::size_t n) {
    Vec nodes, weights;
    gauss_hermite_1d(n, nodes, weights);
    return DiscreteMeasure(Mat(nodes), weights);
}

// The defining identities of a solution, checked with the solution's rule.
void check_solution_invariants(const BassSolution& sol, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const SolverOptions& opt) {
    REQUIRE(sol.converged);
    const QuadratureRule rule = solution_rule(sol);
    const MaxAffine& v = sol.potential();
    const Mat k = kernel_matrix(sol, rule);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Vec g = gaussian_smooth(v, 1.0, rule, Vec(sol.zeta.row(ii).transpose())).gradient;
        CHECK((g - mu.atom(i)).norm() <= opt.tol_barycenter * 1.0001 + 1e-12);
    }
    const Vec nu_hat = k.transpose() * mu.weights();
    CHECK((nu_hat - nu.weights()).cwiseAbs().maxCoeff() <= opt.tol_marginal * 1.0001 + 1e-12);
    CHECK(std::abs(nu.weights().dot(v.intercepts())) < 1e-10);
    CHECK((mu.weights().transpose() * sol.zeta - mu.weights().transpose() * mu.atoms()).norm() < 1e-9);
    // Strictly positive kernels.
    CHECK(k.minCoeff() > 0.0);
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("options are validated") {
    SolverOptions o;
    CHECK_NOTHROW(o.validate());
    o.tol_marginal = 0.0;
    CHECK_THROWS_AS(o.validate(), InvalidMeasureError);
    o = {};
    o.quantile_grid = 512;
    CHECK_THROWS_AS(o.validate(), InvalidMeasureError);
    o = {};
    o.damping = 1.5;
    CHECK_THROWS_AS(o.validate(), InvalidMeasureError);
}

TEST_CASE("Brownian motion is its own Bass martingale") {
    const QuantileFunction gauss{[](double u) { return oracle::Phi_inv(u); }};
    const BassSolution sol = solve_bass_1d(origin(), gauss);
    REQUIRE(sol.converged);
    REQUIRE(sol.profile.has_value());
    CHECK(std::abs(sol.zeta(0, 0)) < 1e-3);
    double sup = 0.0;
    for (std::size_t k = 0; k < sol.profile->z.size(); ++k)
        sup = std::max(sup, std::abs(sol.profile->slope[k] - sol.profile->z[k]));
    CHECK(sup < 1e-3);
}

TEST_CASE("binary example") {
    const BassSolution sol = solve_bass_1d(origin(), binary_nu());
    REQUIRE(sol.converged);
    CHECK(std::abs(sol.zeta(0, 0)) < 1e-9);
    // v = |x| up to the gauge: equal intercepts.
    const Vec& c = sol.potential().intercepts();
    CHECK(std::abs(c(0) - c(1)) < 1e-9);
    const DiscreteMeasure k = kernel(sol, 0);
    CHECK(k.weight(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(k.weight(1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("arctan round trip recovers the derivative profile") {
    const DiscreteMeasure alpha0 = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    const ForwardMarginals fm =
        forward_construct(AnalyticConvex::arctan_potential(), alpha0, QuadratureRule::gauss_hermite(1, 64));
    const QuantileFunction nu = monotone_pushforward([](double z) { return std::atan(z); }, alpha0);
    const BassSolution sol = solve_bass_1d(fm.mu, nu);
    REQUIRE(sol.converged);
    double sup = 0.0;
    for (std::size_t k = 0; k < sol.profile->z.size(); ++k)
        sup = std::max(sup, std::abs(sol.profile->slope[k] - std::atan(sol.profile->z[k])));
    CHECK(sup <= 0.02);
    // The recovered initial law is alpha0.
    for (std::size_t i = 0; i < fm.mu.size(); ++i)
        CHECK(std::abs(std::abs(sol.zeta(static_cast<Eigen::Index>(i), 0)) - 1.0) < 0.02);
    // Linear rate: successive W2 ratios stay below 0.95.
    for (std::size_t i = 2; i < sol.w2_history.size(); ++i)
        if (sol.w2_history[i - 1] > 1e-13) CHECK(sol.w2_history[i] / sol.w2_history[i - 1] < 0.95);
}

TEST_CASE("two-dimensional symmetric square") {
    const DiscreteMeasure nu = DiscreteMeasure::uniform(rows2({{-1, -1}, {-1, 1}, {1, -1}, {1, 1}}));
    const BassSolution sol = solve_bass_nd(origin(2), nu);
    REQUIRE(sol.converged);
    CHECK(sol.potential().intercepts().cwiseAbs().maxCoeff() < 1e-6);
    CHECK(sol.zeta.row(0).norm() < 1e-6);
    const DiscreteMeasure k = kernel(sol, 0);
    REQUIRE(k.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(k.weight(j) == doctest::Approx(0.25).epsilon(1e-6));
    check_solution_invariants(sol, origin(2), nu, SolverOptions{});
}

TEST_CASE("targets on a line are reduced to the one-dimensional problem") {
    const DiscreteMeasure nu = DiscreteMeasure::uniform(rows2({{-1, 0}, {1, 0}}));
    const BassSolution sol = solve_bass_nd(origin(2), nu);
    REQUIRE(sol.converged);
    CHECK(sol.reduced_dim == 1);
    CHECK_FALSE(sol.warnings.empty());
    const DiscreteMeasure k = kernel(sol, 0);
    CHECK(k.weight(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(k.weight(1) == doctest::Approx(0.5).epsilon(1e-9));
    // Agrees with the 1-D solver on the projected instance.
    const BassSolution one = solve_bass_1d(origin(), binary_nu());
    CHECK(sol.zeta(0, 0) == doctest::Approx(one.zeta(0, 0)).scale(1.0).epsilon(1e-9));
}

TEST_CASE("random three-atom targets in the plane") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.1, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        Mat y(3, 2);
        for (Eigen::Index j = 0; j < 3; ++j) y.row(j) << u(rng), u(rng);
        Vec nw(3);
        nw << w(rng), w(rng), w(rng);
        const DiscreteMeasure nu(y, nw / nw.sum());
        const DiscreteMeasure mu = DiscreteMeasure::dirac(moments(nu).barycenter);
        const BassSolution sol = solve_bass_nd(mu, nu);
        CHECK(sol.residuals.marginal < 1e-4);
        const DualCertificate cert = duality_gap_report(sol, mu, nu, solution_rule(sol));
        CHECK(std::abs(cert.primal_value - cert.dual_value) / cert.primal_value < 1e-2);
        check_solution_invariants(sol, mu, nu, SolverOptions{});
    }
}

TEST_CASE("duality gap report examples") {
    const QuadratureRule gh = QuadratureRule::gauss_hermite(1, 64);
    {
        const DiscreteMeasure g = gaussian_atoms(21);
        const BassSolution sol = solve_bass_1d(origin(), g);
        const DualCertificate cert = duality_gap_report(sol, origin(), g, gh);
        CHECK(cert.primal_value == doctest::Approx(1.0).epsilon(1e-2));
        CHECK(cert.dual_value == doctest::Approx(1.0).epsilon(1e-2));
        CHECK(std::abs(cert.gap) < 1e-3);
        // Exact maximal covariance of the discrete target with gamma.
        CHECK(cert.primal_value == doctest::Approx(oracle::mcov_with_gaussian(testing_support::atoms_1d(g))).epsilon(1e-4));
    }
    {
        const BassSolution sol = solve_bass_1d(origin(), binary_nu());
        const DualCertificate cert = duality_gap_report(sol, origin(), binary_nu(), gh);
        CHECK(std::abs(cert.primal_value - kRoot) < 1e-3);
        CHECK(std::abs(cert.dual_value - kRoot) < 1e-3);
        CHECK(std::abs(cert.gap) < 1e-3);
        CHECK(cert.psi_gauge == kGaugeName);
    }
    {
        const BassSolution sol = solve_bass(origin(), origin());
        const DualCertificate cert = duality_gap_report(sol, origin(), origin(), gh);
        CHECK(cert.primal_value == 0.0);
        CHECK(cert.dual_value == 0.0);
    }
}

TEST_CASE("solver errors") {
    CHECK_THROWS_AS(solve_bass(binary_nu(), origin()), NotConvexOrderError);
    const DiscreteMeasure mu = DiscreteMeasure::on_line({2.0, -2.0}, {0.5, 0.5});
    const DiscreteMeasure nu = DiscreteMeasure::on_line({-3.0, -1.0, 1.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    try {
        solve_bass(mu, nu);
        FAIL("expected NotIrreducibleError");
    } catch (const NotIrreducibleError& e) {
        CHECK(mu.atom(e.mu_index())(0) == 2.0);
        CHECK(nu.atom(e.nu_index())(0) == -3.0);
    }
    SolverOptions few;
    few.max_iterations = 1;
    const DiscreteMeasure src = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    try {
        solve_bass(src, nu, few);
        FAIL("expected MaxIterationsError");
    } catch (const MaxIterationsError& e) {
        CHECK(e.partial().iterations == 1);
        CHECK_FALSE(e.partial().converged);
        CHECK(e.partial().v.has_value());
    }
    CHECK_THROWS_AS(solve_bass(origin(), DiscreteMeasure::dirac(vec2(0, 0))), DimensionError);
}

TEST_CASE("converged one-dimensional solutions satisfy the defining identities") {
    std::mt19937_64 rng(52);
    for (int rep = 0; rep < 15; ++rep) {
        const auto inst = testing_support::random_pair(rng, 1, 1 + rep % 4, 2 + rep % 4);
        const SolverOptions opt;
        const BassSolution sol = solve_bass(inst.mu, inst.nu, opt);
        check_solution_invariants(sol, inst.mu, inst.nu, opt);
    }
}

TEST_CASE("marginal residual decreases over the tail of the iteration") {
    std::mt19937_64 rng(53);
    std::vector<BassSolution> battery;
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t dim = 1 + static_cast<std::size_t>(rep % 2);
        const auto inst = testing_support::random_pair(rng, dim, 2, 3 + rep % 2);
        battery.push_back(solve_bass(inst.mu, inst.nu));
    }
    const DiscreteMeasure alpha0 = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    const ForwardMarginals fm = forward_construct(AnalyticConvex::arctan_potential(), alpha0, QuadratureRule::gauss_hermite(1, 64));
    SolverOptions tight;
    tight.tol_marginal = 1e-10;
    tight.tol_barycenter = 1e-12;
    battery.push_back(solve_bass_1d(fm.mu, monotone_pushforward([](double z) { return std::atan(z); }, alpha0), tight));
    for (const BassSolution& sol : battery) {
        const auto& h = sol.marginal_history;
        const std::size_t start = h.size() / 5;
        for (std::size_t k = std::max<std::size_t>(start, 1); k < h.size(); ++k)
            CHECK(h[k] <= h[k - 1] * (1.0 + 1e-9) + 1e-14);
    }
}

TEST_CASE("shifting the starting intercepts by a constant does not change the solution") {
    std::mt19937_64 rng(54);
    for (int rep = 0; rep < 3; ++rep) {
        const auto inst = testing_support::random_pair(rng, 2, 2, 3 + rep % 2);
        SolverOptions opt;
        const BassSolution base = solve_bass_nd(inst.mu, inst.nu, opt);
        SolverOptions shifted = opt;
        shifted.initial_intercepts = Vec::Constant(static_cast<Eigen::Index>(inst.nu.size()), 7.5);
        const BassSolution same = solve_bass_nd(inst.mu, inst.nu, shifted);
        CHECK((same.potential().intercepts() - base.potential().intercepts()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((same.zeta - base.zeta).cwiseAbs().maxCoeff() < 1e-12);
        // Starting from the converged intercepts plus a constant: still the
        // same gauged solution within the tolerances.
        shifted.initial_intercepts = base.potential().intercepts().array() + 3.0;
        const BassSolution warm = solve_bass_nd(inst.mu, inst.nu, shifted);
        CHECK((warm.potential().intercepts() - base.potential().intercepts()).cwiseAbs().maxCoeff() < 1e-3);
        CHECK(warm.iterations <= 2);
    }
}

TEST_CASE("no martingale coupling beats the Bass kernels") {
    std::mt19937_64 rng(55);
    const QuadratureRule gh = QuadratureRule::gauss_hermite(1, 64);
    for (int rep = 0; rep < 3; ++rep) {
        const auto inst = testing_support::random_pair(rng, 1, 3, 4);
        const BassSolution sol = solve_bass(inst.mu, inst.nu);
        const DualCertificate cert = duality_gap_report(sol, inst.mu, inst.nu, gh);
        std::uniform_int_distribution<std::size_t> pi(0, inst.mu.size() - 1), pj(0, inst.nu.size() - 1);
        for (int k = 0; k < 20; ++k) {
            const MartingaleCoupling c = find_mt_coupling(inst.mu, inst.nu, AtomPair{pi(rng), pj(rng)});
            double value = 0.0;
            for (std::size_t i = 0; i < inst.mu.size(); ++i)
                value += inst.mu.weight(i) * oracle::mcov_with_gaussian(testing_support::atoms_1d(c.row_kernel(i)));
            CHECK(value <= cert.primal_value + 1e-6);
        }
    }
}

TEST_CASE("solutions are deterministic") {
    const auto inst = [] {
        std::mt19937_64 rng(56);
        return testing_support::random_pair(rng, 2, 2, 4);
    }();
    SolverOptions opt;
    opt.quadrature = "mc:20000:3";
    const BassSolution a = solve_bass_nd(inst.mu, inst.nu, opt);
    const BassSolution b = solve_bass_nd(inst.mu, inst.nu, opt);
    CHECK(a.potential().intercepts() == b.potential().intercepts());
    CHECK(a.zeta == b.zeta);
    CHECK(a.iterations == b.iterations);
}

}  // TEST_SUITE
