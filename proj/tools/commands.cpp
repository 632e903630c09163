#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "bassmt/io.hpp"
#include "bassmt/martingale.hpp"
#include "bassmt/parallel.hpp"

namespace bassmt::cli {

namespace fs = std::filesystem;

namespace {

std::string file_digest(const std::string& path) {
    if (path.empty()) return "-";
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::stringstream buf;
    buf << in.rdbuf();
    return hash_hex(fnv1a(buf.str()));
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

fs::path prepare_output(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("output directory " + cfg.output_dir + " is not writable");
    return dir;
}

QuadratureRule certificate_rule(const RunConfig& cfg, const BassSolution& sol) {
    if (!cfg.solver.quadrature.empty()) return QuadratureRule::parse(cfg.solver.quadrature, sol.dim);
    return solution_rule(sol);
}

// Source measure implied by a solution: x_i = (grad v * gamma)(zeta_i).
DiscreteMeasure implied_source(const BassSolution& sol) {
    const GaussianCellIntegrator integ(sol.potential(), solution_rule(sol));
    Mat x(sol.zeta.rows(), sol.zeta.cols());
    for (Eigen::Index i = 0; i < sol.zeta.rows(); ++i)
        x.row(i) = integ.integrate(sol.zeta.row(i).transpose()).gradient.transpose();
    return DiscreteMeasure(x, sol.alpha_weights);
}

struct SummaryRow {
    std::string quantity;
    double target;
    double achieved;
    double tolerance;
    bool pass;
};

SummaryRow row(std::string name, double target, double achieved, double tol) {
    return {std::move(name), target, achieved, tol, std::abs(achieved - target) <= tol};
}

SummaryRow upper_bound_row(std::string name, double bound, double achieved) {
    return {std::move(name), bound, achieved, 0.0, achieved <= bound};
}

int finish_reproduce(const RunConfig& cfg, const std::vector<SummaryRow>& rows, std::ostream& out, std::ostream& err) {
    const fs::path dir = prepare_output(cfg);
    const RunStamp stamp{cfg.config_hash(), cfg.seed};
    std::ostringstream csv;
    csv << "# config_hash=" << stamp.config_hash << " seed=" << stamp.seed << '\n';
    csv << "quantity,target,achieved,tolerance,pass\n";
    int code = kOk;
    for (const auto& r : rows) {
        csv << r.quantity << ',' << format_number(r.target) << ',' << format_number(r.achieved) << ','
            << format_number(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
        out << (r.pass ? "ok    " : "FAIL  ") << r.quantity << ": achieved " << format_number(r.achieved)
            << ", target " << format_number(r.target);
        if (r.tolerance > 0.0) out << " +/- " << format_number(r.tolerance);
        out << '\n';
        if (!r.pass) {
            err << "reproduce " << cfg.example << ": row '" << r.quantity << "' failed\n";
            code = kReproduceFailed;
        }
    }
    write_file(dir / (cfg.example + "_summary.csv"), csv.str());
    return code;
}

std::vector<SummaryRow> reproduce_circles(const RunConfig& cfg) {
    constexpr std::size_t kAtoms = 256;
    Mat ring(kAtoms, 2);
    for (std::size_t i = 0; i < kAtoms; ++i) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / kAtoms;
        ring(static_cast<Eigen::Index>(i), 0) = 3.0 * std::cos(th);
        ring(static_cast<Eigen::Index>(i), 1) = 3.0 * std::sin(th);
    }
    const AnalyticConvex v = AnalyticConvex::radial_two_slope(2, 0.5, 1.6, 3.17);
    const QuadratureRule rule = QuadratureRule::monte_carlo(2, 100000, cfg.seed);
    const ForwardMarginals fm = forward_construct(v, DiscreteMeasure::uniform(ring), rule);
    double radius = 0.0;
    for (std::size_t i = 0; i < fm.mu.size(); ++i) radius += fm.mu.weight(i) * fm.mu.atom(i).norm();
    double inner = 0.0, outer = 0.0;
    for (std::size_t j = 0; j < fm.nu.size(); ++j) {
        const double r = fm.nu.atom(j).norm();
        if (std::abs(r - 0.5) < 1e-9) inner += fm.nu.weight(j);
        if (std::abs(r - 1.6) < 1e-9) outer += fm.nu.weight(j);
    }
    return {row("m0_radius", 1.0, radius, 0.02), row("terminal_mass_radius_0.5", 0.5, inner, 0.02),
            row("terminal_mass_radius_1.6", 0.5, outer, 0.02)};
}

std::vector<SummaryRow> reproduce_arctan(const RunConfig& cfg) {
    const DiscreteMeasure alpha0 = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    const ForwardMarginals fm =
        forward_construct(AnalyticConvex::arctan_potential(), alpha0, QuadratureRule::gauss_hermite(1, 64));
    const QuantileFunction nu = monotone_pushforward([](double z) { return std::atan(z); }, alpha0);
    SolverOptions opt = cfg.solver;
    // Run well past the default stopping rule so the rate is observable.
    opt.tol_marginal = std::min(opt.tol_marginal, 1e-10);
    opt.tol_barycenter = std::min(opt.tol_barycenter, 1e-12);
    const BassSolution sol = solve_bass_1d(fm.mu, nu, opt);
    double sup = 0.0;
    for (std::size_t k = 0; k < sol.profile->z.size(); ++k)
        sup = std::max(sup, std::abs(sol.profile->slope[k] - std::atan(sol.profile->z[k])));
    double worst = 0.0;
    const auto& w = sol.w2_history;
    const std::size_t first = w.size() > 10 ? w.size() - 10 : 1;
    std::size_t used = 0;
    for (std::size_t i = std::max<std::size_t>(first, 1); i < w.size(); ++i) {
        if (w[i - 1] <= 1e-13) continue;
        worst = std::max(worst, w[i] / w[i - 1]);
        ++used;
    }
    // Fewer than nine observable ratios cannot show the rate.
    if (used < 9) worst = std::numeric_limits<double>::infinity();
    return {row("profile_sup_error", 0.0, sup, 0.02), upper_bound_row("w2_ratio_final_iterations", 0.95, worst)};
}

std::vector<SummaryRow> reproduce_binary(const RunConfig& cfg) {
    const DiscreteMeasure mu = DiscreteMeasure::dirac(Vec::Zero(1));
    const DiscreteMeasure nu = DiscreteMeasure::on_line({-1.0, 1.0}, {0.5, 0.5});
    const BassSolution sol = solve_bass(mu, nu, cfg.solver);
    const QuadratureRule rule = cfg.solver.quadrature.empty() ? QuadratureRule::gauss_hermite(1, 64)
                                                              : QuadratureRule::parse(cfg.solver.quadrature, 1);
    const DualCertificate cert = duality_gap_report(sol, mu, nu, rule);
    const DiscreteMeasure k = kernel(sol, 0);
    const PathEnsemble ens = sample_paths(sol, cfg.paths, cfg.steps, cfg.seed);
    const FunctionalEstimates f = estimate_functionals(ens, mu, nu);
    const double root = std::sqrt(2.0 / std::numbers::pi);
    return {row("kernel_weight_minus_one", 0.5, k.weight(0), 1e-6),
            row("kernel_weight_plus_one", 0.5, k.weight(1), 1e-6),
            row("primal_value", root, cert.primal_value, 1e-3),
            row("dual_value", root, cert.dual_value, 1e-3),
            row("mt_hat", 2.0 - 2.0 * root, f.mt_hat, 3.0 * f.mt_se)};
}

}  // namespace

std::string RunConfig::canonical() const {
    std::ostringstream s;
    s << "command=" << command << '\n'
      << "example=" << example << '\n'
      << "mu=" << file_digest(mu_path) << '\n'
      << "nu=" << file_digest(nu_path) << '\n'
      << "solution=" << file_digest(solution_path) << '\n'
      << "quadrature=" << solver.quadrature << '\n'
      << "max_iterations=" << solver.max_iterations << '\n'
      << "tol_marginal=" << format_number(solver.tol_marginal) << '\n'
      << "tol_barycenter=" << format_number(solver.tol_barycenter) << '\n'
      << "damping=" << (solver.damping ? format_number(*solver.damping) : std::string("default")) << '\n'
      << "quantile_grid=" << solver.quantile_grid << '\n'
      << "seed=" << seed << '\n'
      << "paths=" << paths << '\n'
      << "steps=" << steps << '\n';
    return s.str();
}

std::string RunConfig::config_hash() const { return hash_hex(fnv1a(canonical())); }

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    DiscreteMeasure mu, nu;
    try {
        std::vector<std::string> warnings;
        mu = read_measure_csv(cfg.mu_path, &warnings);
        nu = read_measure_csv(cfg.nu_path, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << '\n';
        if (mu.dim() != nu.dim()) throw IoError("source and target files have different dimensions");
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }

    const RunStamp stamp{cfg.config_hash(), cfg.seed};
    SolverOptions opt = cfg.solver;
    opt.seed = cfg.seed;
    try {
        const fs::path dir = prepare_output(cfg);
        BassSolution sol;
        int code = kOk;
        try {
            sol = solve_bass(mu, nu, opt);
        } catch (const MaxIterationsError& e) {
            err << "error: " << e.what() << '\n';
            sol = e.partial();
            code = kMaxIterations;
        }
        for (const auto& w : sol.warnings) err << "note: " << w << '\n';
        write_file(dir / "solution.json", solution_to_json(sol, &stamp));
        if (code != kOk) return code;
        const DualCertificate cert = duality_gap_report(sol, mu, nu, certificate_rule(cfg, sol));
        write_file(dir / "certificate.json", certificate_to_json(cert, &stamp));
        out << "converged in " << sol.iterations << " iterations; primal " << format_number(cert.primal_value)
            << ", dual " << format_number(cert.dual_value) << ", gap " << format_number(cert.gap) << '\n';
        return kOk;
    } catch (const NotIrreducibleError& e) {
        err << "error: " << e.what() << '\n';
        err << "witness: source atom " << format_number(mu.atoms()(static_cast<Eigen::Index>(e.mu_index()), 0));
        for (Eigen::Index c = 1; c < mu.atoms().cols(); ++c)
            err << ' ' << format_number(mu.atoms()(static_cast<Eigen::Index>(e.mu_index()), c));
        err << ", target atom " << format_number(nu.atoms()(static_cast<Eigen::Index>(e.nu_index()), 0));
        for (Eigen::Index c = 1; c < nu.atoms().cols(); ++c)
            err << ' ' << format_number(nu.atoms()(static_cast<Eigen::Index>(e.nu_index()), c));
        err << " (indices " << e.mu_index() << ", " << e.nu_index() << ")\n";
        return kNotIrreducible;
    } catch (const NotConvexOrderError& e) {
        err << "error: " << e.what() << '\n';
        return kNotConvexOrder;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }
}

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    BassSolution sol;
    try {
        sol = read_solution_json(cfg.solution_path);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }
    if (!sol.converged) err << "warning: solution is marked as not converged\n";
    try {
        const fs::path dir = prepare_output(cfg);
        const RunStamp stamp{cfg.config_hash(), cfg.seed};
        const PathEnsemble ens = sample_paths(sol, cfg.paths, cfg.steps, cfg.seed);
        DiscreteMeasure mu, nu;
        if (sol.v) {
            mu = cfg.mu_path.empty() ? implied_source(sol) : read_measure_csv(cfg.mu_path);
            nu = cfg.nu_path.empty() ? sol.nu() : read_measure_csv(cfg.nu_path);
        } else {
            mu = cfg.mu_path.empty() ? ens.martingale_law(0) : read_measure_csv(cfg.mu_path);
            nu = cfg.nu_path.empty() ? ens.martingale_law(ens.steps()) : read_measure_csv(cfg.nu_path);
        }
        const FunctionalEstimates f = estimate_functionals(ens, mu, nu);
        const BoundaryReport b = check_boundary(ens, nu);
        const MartingaleReport m = check_martingale(ens);
        {
            std::ofstream paths(dir / "paths.csv", std::ios::binary);
            if (!paths) throw IoError("cannot write paths.csv");
            write_paths_csv(paths, ens, &stamp);
        }
        write_file(dir / "report.json", sampling_report_to_json(f, b, m, cfg.paths, cfg.steps, &stamp));
        out << "P_hat " << format_number(f.p_hat) << " (se " << format_number(f.p_se) << "), MT_hat "
            << format_number(f.mt_hat) << " (se " << format_number(f.mt_se) << ")\n"
            << "martingale check " << (m.pass ? "pass" : "fail") << ", boundary check "
            << (b.pass ? (b.vacuous ? "pass (vacuous)" : "pass") : "fail") << '\n';
        return kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }
}

int cmd_reproduce(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    std::vector<SummaryRow> rows;
    try {
        if (cfg.example == "circles") {
            rows = reproduce_circles(cfg);
        } else if (cfg.example == "arctan") {
            rows = reproduce_arctan(cfg);
        } else if (cfg.example == "binary") {
            rows = reproduce_binary(cfg);
        } else {
            err << "error: unknown example '" << cfg.example << "' (expected circles, arctan or binary)\n";
            return kReproduceFailed;
        }
        return finish_reproduce(cfg, rows, out, err);
    } catch (const Error& e) {
        err << "error: reproduce " << cfg.example << ": " << e.what() << '\n';
        return kReproduceFailed;
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Bass martingale solver"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::size_t threads = 0;
    double damping = 0.0;
    app.add_option("--threads", threads, "Worker threads (default: BASSMT_THREADS or hardware)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--quad", cfg.solver.quadrature, "Quadrature: gh:<n> or mc:<samples>:<seed>");
        sub->add_option("--seed", cfg.seed, "Random seed");
        sub->add_option("-o,--output", cfg.output_dir, "Output directory");
        sub->add_option("--threads", threads, "Worker threads (default: BASSMT_THREADS or hardware)");
    };
    auto add_solver = [&](CLI::App* sub) {
        sub->add_option("--tol-marginal", cfg.solver.tol_marginal, "Marginal residual tolerance");
        sub->add_option("--tol-barycenter", cfg.solver.tol_barycenter, "Barycenter residual tolerance");
        sub->add_option("--damping", damping, "Damping in (0, 1]");
        sub->add_option("--max-iter", cfg.solver.max_iterations, "Maximum outer iterations");
    };
    auto add_paths = [&](CLI::App* sub) {
        sub->add_option("--paths", cfg.paths, "Number of sample paths");
        sub->add_option("--steps", cfg.steps, "Number of time steps");
    };

    CLI::App* solve = app.add_subcommand("solve", "Solve for the Bass martingale between two measure files");
    solve->add_option("--mu", cfg.mu_path, "Source measure CSV")->required();
    solve->add_option("--nu", cfg.nu_path, "Target measure CSV")->required();
    add_common(solve);
    add_solver(solve);

    CLI::App* sample = app.add_subcommand("sample", "Sample martingale paths from a solution");
    sample->add_option("--solution", cfg.solution_path, "Solution JSON")->required();
    sample->add_option("--mu", cfg.mu_path, "Source measure CSV (default: implied by the solution)");
    sample->add_option("--nu", cfg.nu_path, "Target measure CSV (default: the solution's slopes)");
    add_common(sample);
    add_paths(sample);

    CLI::App* reproduce = app.add_subcommand("reproduce", "Run a built-in example end to end");
    reproduce->add_option("example", cfg.example, "circles, arctan or binary")->required();
    add_common(reproduce);
    add_solver(reproduce);
    add_paths(reproduce);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version land here with a zero code.
        return app.exit(e) == 0 ? kOk : kBadInput;
    }
    if (threads > 0) set_thread_count(threads);
    if (damping > 0.0) cfg.solver.damping = damping;
    try {
        cfg.solver.validate();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }

    if (solve->parsed()) {
        cfg.command = "solve";
        return cmd_solve(cfg, std::cout, std::cerr);
    }
    if (sample->parsed()) {
        cfg.command = "sample";
        return cmd_sample(cfg, std::cout, std::cerr);
    }
    cfg.command = "reproduce";
    return cmd_reproduce(cfg, std::cout, std::cerr);
}

}  // namespace bassmt::cli
