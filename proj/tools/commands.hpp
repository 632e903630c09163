#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "bassmt/solver.hpp"

namespace bassmt::cli {

enum ExitCode : int {
    kOk = 0,
    kReproduceFailed = 1,
    kNotIrreducible = 2,
    kNotConvexOrder = 3,
    kMaxIterations = 4,
    kBadInput = 5,
};

struct RunConfig {
    std::string command;
    std::string example;  // reproduce: circles | arctan | binary
    std::string mu_path;
    std::string nu_path;
    std::string solution_path;
    SolverOptions solver;
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    std::size_t paths = 10000;
    std::size_t steps = 64;

    // Everything that influences results, in a fixed textual form; input
    // files enter through a hash of their contents.
    std::string canonical() const;
    std::string config_hash() const;
};

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_reproduce(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace bassmt::cli
