#include "bassmt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "bassmt/errors.hpp"

namespace bassmt {

using nlohmann::json;

namespace {

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Mat matrix_from(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw IoError(std::string(what) + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) throw IoError(std::string(what) + " rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw IoError(std::string(what) + " rows have inconsistent lengths");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) throw IoError(std::string(what) + " entries must be numbers");
            m(r, c) = x.get<double>();
        }
    }
    return m;
}

Vec vector_from(const json& j, const char* what) {
    if (!j.is_array()) throw IoError(std::string(what) + " must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw IoError(std::string(what) + " entries must be numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

std::vector<double> std_vector_from(const json& j, const char* what) {
    const Vec v = vector_from(j, what);
    return {v.data(), v.data() + v.size()};
}

void stamp_json(json& j, const RunStamp* stamp) {
    if (stamp) j["meta"] = {{"config_hash", stamp->config_hash}, {"seed", stamp->seed}};
}

// JSON has no infinities; they are written as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void stamp_csv(std::ostream& out, const RunStamp* stamp) {
    if (stamp) out << "# config_hash=" << stamp->config_hash << " seed=" << stamp->seed << '\n';
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        std::ostringstream msg;
        msg << "line " << line_no << ": '" << s << "' is not a number";
        throw IoError(msg.str());
    }
    return x;
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

DiscreteMeasure parse_measure_csv(std::istream& in, std::vector<std::string>* warnings) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool header = false;
    std::vector<double> weights;
    std::vector<std::vector<double>> atoms;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fields = split_csv(t);
        if (!header) {
            if (fields.size() < 2 || fields[0] != "weight")
                throw IoError("measure CSV header must be weight,x1,...,xd");
            for (std::size_t c = 1; c < fields.size(); ++c)
                if (fields[c] != "x" + std::to_string(c))
                    throw IoError("measure CSV header must be weight,x1,...,xd");
            dim = fields.size() - 1;
            header = true;
            continue;
        }
        if (fields.size() != dim + 1) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected " << dim + 1 << " fields, got " << fields.size();
            throw IoError(msg.str());
        }
        weights.push_back(parse_double(fields[0], line_no));
        std::vector<double> a(dim);
        for (std::size_t c = 0; c < dim; ++c) a[c] = parse_double(fields[c + 1], line_no);
        atoms.push_back(std::move(a));
    }
    if (!header) throw IoError("measure CSV is empty");
    if (atoms.empty()) throw IoError("measure CSV has no atoms");
    Mat A(static_cast<Eigen::Index>(atoms.size()), static_cast<Eigen::Index>(dim));
    Vec w(static_cast<Eigen::Index>(atoms.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        for (std::size_t c = 0; c < dim; ++c) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = atoms[i][c];
        w(static_cast<Eigen::Index>(i)) = weights[i];
        total += weights[i];
    }
    if (warnings && std::abs(total - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << "weights sum to " << format_number(total) << "; normalized";
        warnings->push_back(msg.str());
    }
    try {
        return DiscreteMeasure(A, w);
    } catch (const InvalidMeasureError& e) {
        throw IoError(e.what());
    }
}

DiscreteMeasure read_measure_csv(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open measure file " + path);
    try {
        return parse_measure_csv(in, warnings);
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

void write_measure_csv(std::ostream& out, const DiscreteMeasure& m, const RunStamp* stamp) {
    stamp_csv(out, stamp);
    out << "weight";
    for (std::size_t c = 1; c <= m.dim(); ++c) out << ",x" << c;
    out << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << format_number(m.weight(i));
        for (std::size_t c = 0; c < m.dim(); ++c)
            out << ',' << format_number(m.atoms()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        out << '\n';
    }
}

std::string max_affine_to_json(const MaxAffine& v) {
    json j;
    j["dim"] = v.dim();
    j["slopes"] = matrix_json(v.slopes());
    j["intercepts"] = vector_json(v.intercepts());
    return j.dump(2);
}

MaxAffine max_affine_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        MaxAffine v(matrix_from(j.at("slopes"), "slopes"), vector_from(j.at("intercepts"), "intercepts"));
        if (j.contains("dim") && j["dim"].get<std::size_t>() != v.dim()) throw IoError("dim does not match the slopes");
        return v;
    } catch (const json::exception& e) {
        throw IoError(std::string("invalid max-affine JSON: ") + e.what());
    } catch (const InvalidMeasureError& e) {
        throw IoError(std::string("invalid max-affine JSON: ") + e.what());
    }
}

std::string solution_to_json(const BassSolution& sol, const RunStamp* stamp) {
    json j;
    j["dim"] = sol.dim;
    if (sol.v) {
        j["nu_atoms"] = matrix_json(sol.v->slopes());
        j["nu_weights"] = vector_json(sol.nu_weights);
        j["intercepts"] = vector_json(sol.v->intercepts());
    }
    if (sol.profile) j["profile"] = {{"z", sol.profile->z}, {"slope", sol.profile->slope}};
    j["alpha"] = {{"atoms", matrix_json(sol.zeta)}, {"weights", vector_json(sol.alpha_weights)}};
    j["gauge"] = sol.gauge;
    j["residuals"] = {{"marginal", sol.residuals.marginal}, {"barycenter", sol.residuals.barycenter}};
    j["iterations"] = sol.iterations;
    j["converged"] = sol.converged;
    j["quadrature"] = sol.quadrature;
    j["reduced_dim"] = sol.reduced_dim;
    j["warnings"] = sol.warnings;
    stamp_json(j, stamp);
    return j.dump(2);
}

BassSolution solution_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        BassSolution sol;
        sol.dim = j.at("dim").get<std::size_t>();
        if (j.contains("nu_atoms")) {
            sol.v = MaxAffine(matrix_from(j.at("nu_atoms"), "nu_atoms"), vector_from(j.at("intercepts"), "intercepts"));
            sol.nu_weights = vector_from(j.at("nu_weights"), "nu_weights");
            if (sol.v->dim() != sol.dim || static_cast<std::size_t>(sol.nu_weights.size()) != sol.v->pieces())
                throw IoError("nu_atoms, nu_weights and dim are inconsistent");
        } else if (j.contains("profile")) {
            MonotoneProfile p;
            p.z = std_vector_from(j["profile"].at("z"), "profile.z");
            p.slope = std_vector_from(j["profile"].at("slope"), "profile.slope");
            if (p.z.size() != p.slope.size() || p.z.size() < 2) throw IoError("profile tables are inconsistent");
            sol.profile = std::move(p);
        } else {
            throw IoError("solution has neither nu_atoms nor a profile");
        }
        const json& alpha = j.at("alpha");
        sol.zeta = matrix_from(alpha.at("atoms"), "alpha.atoms");
        sol.alpha_weights = vector_from(alpha.at("weights"), "alpha.weights");
        if (sol.zeta.rows() != sol.alpha_weights.size() || static_cast<std::size_t>(sol.zeta.cols()) != sol.dim)
            throw IoError("alpha atoms and weights are inconsistent");
        sol.gauge = j.at("gauge").get<std::string>();
        sol.residuals.marginal = j.at("residuals").at("marginal").get<double>();
        sol.residuals.barycenter = j.at("residuals").at("barycenter").get<double>();
        sol.iterations = j.at("iterations").get<std::size_t>();
        sol.converged = j.value("converged", true);
        sol.quadrature = j.value("quadrature", std::string());
        sol.reduced_dim = j.value("reduced_dim", sol.dim);
        if (j.contains("warnings")) sol.warnings = j["warnings"].get<std::vector<std::string>>();
        return sol;
    } catch (const json::exception& e) {
        throw IoError(std::string("invalid solution JSON: ") + e.what());
    } catch (const InvalidMeasureError& e) {
        throw IoError(std::string("invalid solution JSON: ") + e.what());
    }
}

BassSolution read_solution_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open solution file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return solution_from_json(buf.str());
}

std::string certificate_to_json(const DualCertificate& cert, const RunStamp* stamp) {
    json j;
    j["dual_value"] = finite_or_null(cert.dual_value);
    j["primal_value"] = finite_or_null(cert.primal_value);
    j["gap"] = finite_or_null(cert.gap);
    j["relative_gap"] = finite_or_null(cert.relative_gap);
    j["primal_error"] = finite_or_null(cert.primal_error);
    j["dual_error"] = finite_or_null(cert.dual_error);
    j["psi_gauge"] = cert.psi_gauge;
    j["quadrature"] = cert.quadrature;
    stamp_json(j, stamp);
    return j.dump(2);
}

std::string sampling_report_to_json(const FunctionalEstimates& f, const BoundaryReport& b, const MartingaleReport& m,
                                    std::size_t n_paths, std::size_t n_steps, const RunStamp* stamp) {
    json j;
    j["n_paths"] = n_paths;
    j["n_steps"] = n_steps;
    j["functionals"] = {{"P_hat", f.p_hat},
                        {"P_se", f.p_se},
                        {"MT_hat", f.mt_hat},
                        {"MT_se", f.mt_se},
                        {"relation_residual", f.relation_residual},
                        {"relation_se", f.relation_se}};
    j["boundary"] = {{"pass", b.pass},
                     {"vacuous", b.vacuous},
                     {"min_distance", finite_or_null(b.min_distance)},
                     {"violations", b.violations},
                     {"checked", b.checked},
                     {"note", b.note}};
    json tests = json::array();
    for (const auto& t : m.tests)
        tests.push_back({{"coordinate", t.coordinate},
                         {"bin", t.bin},
                         {"statistic", t.statistic},
                         {"threshold", t.threshold},
                         {"pass", t.pass}});
    j["martingale"] = {{"pass", m.pass}, {"worst_ratio", m.worst_ratio}, {"tests", tests}};
    stamp_json(j, stamp);
    return j.dump(2);
}

void write_paths_csv(std::ostream& out, const PathEnsemble& ens, const RunStamp* stamp) {
    stamp_csv(out, stamp);
    out << "path_id,t";
    for (std::size_t c = 1; c <= ens.dim; ++c) out << ",b_" << c;
    for (std::size_t c = 1; c <= ens.dim; ++c) out << ",m_" << c;
    out << '\n';
    const auto dd = static_cast<Eigen::Index>(ens.dim);
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
        const auto pp = static_cast<Eigen::Index>(p);
        for (std::size_t k = 0; k < ens.times.size(); ++k) {
            out << p << ',' << format_number(ens.times[k]);
            for (Eigen::Index c = 0; c < dd; ++c) out << ',' << format_number(ens.b[k](pp, c));
            for (Eigen::Index c = 0; c < dd; ++c) out << ',' << format_number(ens.m[k](pp, c));
            out << '\n';
        }
    }
}

}  // namespace bassmt
