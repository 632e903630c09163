#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bassmt/io.hpp"
#include "bassmt/solver.hpp"
#include "commands.hpp"
#include "oracles.hpp"

using namespace bassmt;
using namespace bassmt::cli;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case under the build tree's temp area.
struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("bassmt_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    }
    std::string read(const std::string& name) const {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }
};

RunConfig solve_config(const Scratch& s, const std::string& mu, const std::string& nu) {
    RunConfig cfg;
    cfg.command = "solve";
    cfg.mu_path = s.write("mu.csv", mu);
    cfg.nu_path = s.write("nu.csv", nu);
    cfg.output_dir = (s.dir / "out").string();
    return cfg;
}

const char* kOrigin = "weight,x1\n1,0\n";
const char* kBinary = "weight,x1\n0.5,-1\n0.5,1\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve writes a solution and a certificate") {
    Scratch s("solve");
    RunConfig cfg = solve_config(s, kOrigin, kBinary);
    std::ostringstream out, err;
    REQUIRE(cmd_solve(cfg, out, err) == kOk);
    const auto cert = nlohmann::json::parse(s.read("out/certificate.json"));
    CHECK(std::abs(cert.at("gap").get<double>()) < 1e-3);
    const auto sol = nlohmann::json::parse(s.read("out/solution.json"));
    CHECK(sol.at("meta").at("config_hash") == cfg.config_hash());
    CHECK(cert.at("meta").at("config_hash") == cfg.config_hash());
    CHECK(sol.at("meta").at("seed") == cfg.seed);

    // A rerun is byte identical.
    const std::string first = s.read("out/solution.json");
    REQUIRE(cmd_solve(cfg, out, err) == kOk);
    CHECK(s.read("out/solution.json") == first);
}

TEST_CASE("solve reports convex-order and irreducibility failures") {
    Scratch s("solve_fail");
    std::ostringstream out, err;
    RunConfig wrong = solve_config(s, kBinary, kOrigin);
    CHECK(cmd_solve(wrong, out, err) == kNotConvexOrder);

    RunConfig red = solve_config(s, "weight,x1\n0.5,2\n0.5,-2\n", "weight,x1\n0.25,-3\n0.25,-1\n0.25,1\n0.25,3\n");
    std::ostringstream err2;
    CHECK(cmd_solve(red, out, err2) == kNotIrreducible);
    CHECK(err2.str().find("witness: source atom 2, target atom -3") != std::string::npos);

    RunConfig bad = solve_config(s, "mass,x\n1,0\n", kBinary);
    CHECK(cmd_solve(bad, out, err) == kBadInput);
}

TEST_CASE("solve with too few iterations writes the partial solution") {
    Scratch s("solve_iter");
    RunConfig cfg = solve_config(s, kBinary, "weight,x1\n0.25,-3\n0.25,-1\n0.25,1\n0.25,3\n");
    cfg.solver.max_iterations = 1;
    std::ostringstream out, err;
    CHECK(cmd_solve(cfg, out, err) == kMaxIterations);
    CHECK(fs::exists(s.dir / "out" / "solution.json"));
}

TEST_CASE("sample on the binary solution") {
    Scratch s("sample");
    RunConfig cfg = solve_config(s, kOrigin, kBinary);
    std::ostringstream out, err;
    REQUIRE(cmd_solve(cfg, out, err) == kOk);
    RunConfig smp;
    smp.command = "sample";
    smp.solution_path = (s.dir / "out" / "solution.json").string();
    smp.output_dir = (s.dir / "paths").string();
    smp.paths = 10000;
    smp.steps = 32;
    smp.seed = 4;
    REQUIRE(cmd_sample(smp, out, err) == kOk);
    const auto rep = nlohmann::json::parse(s.read("paths/report.json"));
    const double p = rep.at("functionals").at("P_hat").get<double>();
    const double se = rep.at("functionals").at("P_se").get<double>();
    CHECK(std::abs(p - std::sqrt(2.0 / std::numbers::pi)) < 3.0 * se);
    CHECK(rep.at("martingale").at("pass") == true);
    CHECK(rep.at("boundary").at("pass") == true);
    CHECK(rep.at("meta").at("config_hash") == smp.config_hash());
    CHECK(rep.at("meta").at("seed") == 4);
    const std::string paths = s.read("paths/paths.csv");
    CHECK(paths.rfind("# config_hash=" + smp.config_hash() + " seed=4\n", 0) == 0);

    const std::string first = s.read("paths/report.json");
    REQUIRE(cmd_sample(smp, out, err) == kOk);
    CHECK(s.read("paths/report.json") == first);
    CHECK(s.read("paths/paths.csv") == paths);

    // A different seed changes the hash.
    RunConfig other = smp;
    other.seed = 5;
    CHECK(other.config_hash() != smp.config_hash());
}

TEST_CASE("sample on a tabulated Brownian solution") {
    Scratch s("brownian");
    const BassSolution sol = solve_bass_1d(DiscreteMeasure::dirac(Vec::Zero(1)),
                                           QuantileFunction{[](double u) { return oracle::Phi_inv(u); }});
    RunConfig smp;
    smp.command = "sample";
    smp.solution_path = s.write("brownian.json", solution_to_json(sol));
    smp.output_dir = (s.dir / "out").string();
    smp.paths = 2000;
    smp.steps = 32;
    std::ostringstream out, err;
    REQUIRE(cmd_sample(smp, out, err) == kOk);
    const auto rep = nlohmann::json::parse(s.read("out/report.json"));
    CHECK(rep.at("functionals").at("MT_hat").get<double>() < 1e-3);
}

TEST_CASE("sample rejects unreadable solutions") {
    Scratch s("corrupt");
    RunConfig smp;
    smp.command = "sample";
    smp.solution_path = s.write("bad.json", "{\"dim\": 1, \"nu_atoms\": [[");
    smp.output_dir = (s.dir / "out").string();
    std::ostringstream out, err;
    CHECK(cmd_sample(smp, out, err) == kBadInput);
    smp.solution_path = (s.dir / "missing.json").string();
    CHECK(cmd_sample(smp, out, err) == kBadInput);
}

TEST_CASE("reproduce binary") {
    Scratch s("reproduce");
    RunConfig cfg;
    cfg.command = "reproduce";
    cfg.example = "binary";
    cfg.output_dir = s.dir.string();
    std::ostringstream out, err;
    CHECK(cmd_reproduce(cfg, out, err) == kOk);
    const std::string csv = s.read("binary_summary.csv");
    CHECK(csv.rfind("# config_hash=" + cfg.config_hash(), 0) == 0);
    CHECK(csv.find(",false") == std::string::npos);
    cfg.example = "nothing";
    CHECK(cmd_reproduce(cfg, out, err) == kReproduceFailed);
}

TEST_CASE("canonical configuration") {
    RunConfig a, b;
    a.command = b.command = "sample";
    CHECK(a.config_hash() == b.config_hash());
    b.paths = 10;
    CHECK(a.config_hash() != b.config_hash());
    CHECK(a.config_hash().size() == 16);
}

}  // TEST_SUITE
