#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "bassmt/convexfn.hpp"
#include "bassmt/martingale.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/solver.hpp"
#include "bassmt/transport.hpp"

using namespace bassmt;

namespace {

MaxAffine random_potential(std::size_t dim, std::size_t pieces, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Mat a(static_cast<Eigen::Index>(pieces), static_cast<Eigen::Index>(dim));
    Vec c(static_cast<Eigen::Index>(pieces));
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        for (Eigen::Index k = 0; k < a.cols(); ++k) a(j, k) = u(rng);
        c(j) = 0.5 * u(rng);
    }
    return MaxAffine(a, c);
}

void BM_CellMasses1d(benchmark::State& state) {
    const MaxAffine v = random_potential(1, static_cast<std::size_t>(state.range(0)), 1);
    const QuadratureRule rule = QuadratureRule::gauss_hermite(1, 64);
    Vec zeta = Vec::Constant(1, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(gaussian_cell_masses(v, zeta, rule));
}
BENCHMARK(BM_CellMasses1d)->Arg(4)->Arg(16)->Arg(64);

void BM_CellMasses2d(benchmark::State& state) {
    const MaxAffine v = random_potential(2, static_cast<std::size_t>(state.range(0)), 2);
    const QuadratureRule rule = QuadratureRule::gauss_hermite(2, 20);
    Vec zeta = Vec::Constant(2, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(gaussian_cell_masses(v, zeta, rule));
}
BENCHMARK(BM_CellMasses2d)->Arg(4)->Arg(16);

void BM_SmoothedInverse1d(benchmark::State& state) {
    const MaxAffine v(Mat((Mat(3, 1) << -1.0, 0.0, 1.0).finished()), Vec::Zero(3));
    const QuadratureRule rule = QuadratureRule::gauss_hermite(1, 64);
    const Vec x = Vec::Constant(1, 0.4);
    for (auto _ : state) benchmark::DoNotOptimize(smoothed_grad_inverse(v, x, rule, 1e-10));
}
BENCHMARK(BM_SmoothedInverse1d);

void BM_SolveBinary(benchmark::State& state) {
    const DiscreteMeasure mu = DiscreteMeasure::dirac(Vec::Zero(1));
    const DiscreteMeasure nu = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    for (auto _ : state) benchmark::DoNotOptimize(solve_bass(mu, nu));
}
BENCHMARK(BM_SolveBinary)->Unit(benchmark::kMillisecond);

void BM_SolveSquare(benchmark::State& state) {
    const DiscreteMeasure mu = DiscreteMeasure::dirac(Vec::Zero(2));
    const DiscreteMeasure nu =
        DiscreteMeasure::uniform((Mat(4, 2) << -1, -1, -1, 1, 1, -1, 1, 1).finished());
    for (auto _ : state) benchmark::DoNotOptimize(solve_bass(mu, nu));
}
BENCHMARK(BM_SolveSquare)->Unit(benchmark::kMillisecond);

void BM_SamplePaths(benchmark::State& state) {
    const DiscreteMeasure mu = DiscreteMeasure::dirac(Vec::Zero(1));
    const DiscreteMeasure nu = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    const BassSolution sol = solve_bass(mu, nu);
    for (auto _ : state) benchmark::DoNotOptimize(sample_paths(sol, static_cast<std::size_t>(state.range(0)), 64, 1));
}
BENCHMARK(BM_SamplePaths)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_CheckIrreducible(benchmark::State& state) {
    const DiscreteMeasure mu = DiscreteMeasure::on_line({-0.5, 0.5}, {0.5, 0.5});
    const DiscreteMeasure nu = DiscreteMeasure::on_line({-3.0, -1.0, 1.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    for (auto _ : state) benchmark::DoNotOptimize(check_irreducible(mu, nu));
}
BENCHMARK(BM_CheckIrreducible);

}  // namespace
BENCHMARK_MAIN();
