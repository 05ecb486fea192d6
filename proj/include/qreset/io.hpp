// Flat-file formats: trajectory/protocol/sweep CSV and the run summary JSON.
// Floats go out with 15 significant digits so files compare byte for byte.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qreset/errors.hpp"
#include "qreset/protocol.hpp"
#include "qreset/types.hpp"

namespace qreset::io {

/// Malformed input file; line() is 1-based, 0 when not tied to a line.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,p_e,lambda_H\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        os << num(traj.ts[i]) << ',' << num(traj.p_e[i]) << ',' << num(traj.lambda_H[i]) << '\n';
    }
}

/// Protocol file holding the sampled gap of a trajectory.
inline void write_protocol_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,lambda_H\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        os << num(traj.ts[i]) << ',' << num(traj.lambda_H[i]) << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    const auto end = s.find_last_not_of(ws);
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}

inline double parse_double(const std::string& field, std::size_t line) {
    const std::string s = trim(field);
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) {
        throw FormatError("line " + std::to_string(line) + ": not a number: '" + s + "'", line);
    }
    return x;
}

} // namespace detail

/// Reads `t,lambda_H` rows (header required) into a single sampled segment.
inline ControlProtocol read_protocol_csv(std::istream& is) {
    std::string line;
    std::size_t no = 0;
    bool header = false;
    SampledGap gap;
    while (std::getline(is, line)) {
        ++no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (!header) {
            const auto cols = detail::split(line);
            if (cols.size() != 2 || detail::trim(cols[0]) != "t" || detail::trim(cols[1]) != "lambda_H") {
                throw FormatError("line " + std::to_string(no) + ": expected header 't,lambda_H'", no);
            }
            header = true;
            continue;
        }
        const auto cols = detail::split(line);
        if (cols.size() != 2) {
            throw FormatError("line " + std::to_string(no) + ": expected 2 fields, got " +
                                  std::to_string(cols.size()),
                              no);
        }
        const double t = detail::parse_double(cols[0], no);
        const double l = detail::parse_double(cols[1], no);
        if (gap.ts.empty() && t != 0.0) {
            throw FormatError("line " + std::to_string(no) + ": first time must be 0", no);
        }
        if (!gap.ts.empty() && !(t > gap.ts.back())) {
            throw FormatError("line " + std::to_string(no) + ": times must increase strictly", no);
        }
        if (!std::isfinite(l) || l < 0.0 || (l == 0.0 && !gap.ts.empty())) {
            throw FormatError("line " + std::to_string(no) + ": gap must be > 0 after t = 0", no);
        }
        gap.ts.push_back(t);
        gap.lambdas.push_back(l);
    }
    if (!header) {
        throw FormatError("empty protocol file", 0);
    }
    if (gap.ts.size() < 2) {
        throw FormatError("protocol needs at least 2 rows", no);
    }
    ControlProtocol p;
    p.segments.push_back(std::move(gap));
    return p;
}

struct SweepRow {
    double tau = 0.0;
    double epsilon = 0.0;
    std::string label;
    std::optional<double> W_ex;
    std::optional<double> J;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "tau,epsilon,case,W_ex,J\n";
    for (const auto& r : rows) {
        os << num(r.tau) << ',' << num(r.epsilon) << ',' << r.label << ','
           << (r.W_ex ? num(*r.W_ex) : "") << ',' << (r.J ? num(*r.J) : "") << '\n';
    }
}

struct CaseCell {
    double tau = 0.0;
    double epsilon = 0.0;
    std::string label;
};

inline void write_case_csv(std::ostream& os, const std::vector<CaseCell>& cells) {
    os << "tau,epsilon,case\n";
    for (const auto& c : cells) {
        os << num(c.tau) << ',' << num(c.epsilon) << ',' << c.label << '\n';
    }
}

struct BoundaryPoint {
    double epsilon = 0.0;
    double tau_c1 = 0.0;
    std::optional<double> tau_c2;
};

inline void write_boundary_csv(std::ostream& os, const std::vector<BoundaryPoint>& pts) {
    os << "epsilon,tau_c1,tau_c2\n";
    for (const auto& b : pts) {
        os << num(b.epsilon) << ',' << num(b.tau_c1) << ',' << (b.tau_c2 ? num(*b.tau_c2) : "") << '\n';
    }
}

struct Diagnostics {
    double shooting_parameter = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

/// Summary of one solve.
struct RunResult {
    double tau = 0.0;
    double epsilon = 0.0;
    std::optional<double> lambda_max;
    std::string label; ///< unbounded, touched, untouched, inaccessible, infeasible
    std::optional<double> t_star;
    std::optional<double> tau_c1;
    std::optional<double> tau_c2;
    std::optional<double> tau_min;          ///< set when inaccessible
    std::optional<double> lambda_threshold; ///< set when infeasible
    std::optional<WorkBreakdown> work;
    std::optional<Diagnostics> diagnostics;
    std::map<std::string, std::string> artifacts;
    std::optional<std::string> reason;
};

namespace detail {

template <class T>
void put(nlohmann::json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <class T>
void get(const nlohmann::json& j, const char* key, std::optional<T>& v) {
    if (j.contains(key) && !j.at(key).is_null()) v = j.at(key).get<T>();
}

} // namespace detail

inline nlohmann::json to_json(const RunResult& r) {
    nlohmann::json j;
    j["tau"] = r.tau;
    j["epsilon"] = r.epsilon;
    detail::put(j, "lambda_max", r.lambda_max);
    j["case"] = r.label;
    detail::put(j, "t_star", r.t_star);
    detail::put(j, "tau_c1", r.tau_c1);
    detail::put(j, "tau_c2", r.tau_c2);
    detail::put(j, "tau_min", r.tau_min);
    detail::put(j, "lambda_threshold", r.lambda_threshold);
    if (r.work) {
        const auto& w = *r.work;
        nlohmann::json wj;
        wj["J"] = w.J;
        detail::put(wj, "J1", w.J1);
        detail::put(wj, "J2", w.J2);
        wj["W_sc1"] = w.W_sc1;
        wj["W_qa2"] = w.W_qa2;
        wj["W_sc"] = w.W_sc;
        wj["W_qs"] = w.W_qs;
        wj["W_ex"] = w.W_ex;
        j["work"] = wj;
    }
    if (r.diagnostics) {
        j["diagnostics"] = {{"shooting_parameter", r.diagnostics->shooting_parameter},
                            {"residual", r.diagnostics->residual},
                            {"iterations", r.diagnostics->iterations}};
    }
    j["artifacts"] = r.artifacts;
    detail::put(j, "reason", r.reason);
    return j;
}

inline RunResult run_result_from_json(const nlohmann::json& j) {
    RunResult r;
    r.tau = j.at("tau").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    detail::get(j, "lambda_max", r.lambda_max);
    r.label = j.at("case").get<std::string>();
    detail::get(j, "t_star", r.t_star);
    detail::get(j, "tau_c1", r.tau_c1);
    detail::get(j, "tau_c2", r.tau_c2);
    detail::get(j, "tau_min", r.tau_min);
    detail::get(j, "lambda_threshold", r.lambda_threshold);
    if (j.contains("work")) {
        const auto& wj = j.at("work");
        WorkBreakdown w;
        w.J = wj.at("J").get<double>();
        detail::get(wj, "J1", w.J1);
        detail::get(wj, "J2", w.J2);
        w.W_sc1 = wj.at("W_sc1").get<double>();
        w.W_qa2 = wj.at("W_qa2").get<double>();
        w.W_sc = wj.at("W_sc").get<double>();
        w.W_qs = wj.at("W_qs").get<double>();
        w.W_ex = wj.at("W_ex").get<double>();
        r.work = w;
    }
    if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        r.diagnostics = Diagnostics{d.at("shooting_parameter").get<double>(),
                                    d.at("residual").get<double>(), d.at("iterations").get<int>()};
    }
    if (j.contains("artifacts")) {
        r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    }
    detail::get(j, "reason", r.reason);
    return r;
}

/// Pretty-printed with a trailing newline.
inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    f << text;
}

} // namespace qreset::io
