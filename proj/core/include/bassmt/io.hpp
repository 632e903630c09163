#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bassmt/convexfn.hpp"
#include "bassmt/dualeval.hpp"
#include "bassmt/martingale.hpp"
#include "bassmt/measures.hpp"
#include "bassmt/solver.hpp"

namespace bassmt {

// Provenance embedded in every written artifact.
struct RunStamp {
    std::string config_hash;
    std::uint64_t seed = 0;
};

std::uint64_t fnv1a(std::string_view text);
std::string hash_hex(std::uint64_t h);

// Measure CSV: header `weight,x1,...,xd`, one atom per row. Lines starting
// with '#' are ignored. Weights are normalized; a warning is appended when
// they did not sum to one within 1e-6.
DiscreteMeasure parse_measure_csv(std::istream& in, std::vector<std::string>* warnings = nullptr);
DiscreteMeasure read_measure_csv(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_measure_csv(std::ostream& out, const DiscreteMeasure& m, const RunStamp* stamp = nullptr);

// {"dim":d,"slopes":[[...]],"intercepts":[...]}
std::string max_affine_to_json(const MaxAffine& v);
MaxAffine max_affine_from_json(const std::string& text);

// {"dim","nu_atoms","nu_weights","intercepts","alpha":{"atoms","weights"},
//  "gauge","residuals","iterations",...}; profile solutions carry
// "profile":{"z","slope"} instead of atoms and intercepts.
std::string solution_to_json(const BassSolution& sol, const RunStamp* stamp = nullptr);
BassSolution solution_from_json(const std::string& text);
BassSolution read_solution_json(const std::string& path);

std::string certificate_to_json(const DualCertificate& cert, const RunStamp* stamp = nullptr);

std::string sampling_report_to_json(const FunctionalEstimates& f, const BoundaryReport& b, const MartingaleReport& m,
                                    std::size_t n_paths, std::size_t n_steps, const RunStamp* stamp = nullptr);

// Long format `path_id,t,b_1..b_d,m_1..m_d`.
void write_paths_csv(std::ostream& out, const PathEnsemble& ens, const RunStamp* stamp = nullptr);

// Shortest round-trip decimal form used by all text outputs.
std::string format_number(double x);

}  // namespace bassmt
