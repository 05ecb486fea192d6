// Command-line front end. run() is the whole program; tools/qreset.cpp only
// forwards argv so the commands can also be driven in-process.

#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qreset/bounded.hpp"
#include "qreset/errors.hpp"
#include "qreset/io.hpp"
#include "qreset/model.hpp"
#include "qreset/unbounded.hpp"
#include "qreset/verify.hpp"

namespace qreset::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUnreachable = 2 };

inline constexpr const char* kUnitsNote =
    "Units: all values are dimensionless. Times are gamma*t (gamma = bath relaxation\n"
    "rate), gaps are beta*lambda (beta = 1/k_B T), work is in units of k_B T.\n"
    "Example hardware bound: superconducting qubits reach beta*lambda_max ~ 5\n"
    "(pass --lambda-max 5); there is no default bound.";

/// Grid value i of n between lo and hi, geometric when log is set.
inline double grid_value(double lo, double hi, int i, int n, bool log) {
    if (n <= 1) return lo;
    const double w = static_cast<double>(i) / (n - 1);
    if (log) return std::exp(std::log(lo) + w * (std::log(hi) - std::log(lo)));
    return lo + w * (hi - lo);
}

/// f(0..n-1) on `jobs` threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& f) {
    std::vector<T> out(n);
    const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) out[i] = f(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

namespace detail {

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        io::write_file(path, text);
    }
}

inline io::RunResult solve_task(const ResetTask& task, std::size_t samples, bool with_tau_c2,
                                Trajectory* traj_out) {
    io::RunResult r;
    r.tau = task.tau;
    r.epsilon = task.epsilon;
    r.lambda_max = task.lambda_max;
    if (!task.lambda_max) {
        unbounded::ShootingConfig cfg;
        cfg.samples = samples;
        auto sol = unbounded::solve_unbounded(task, cfg);
        r.label = "unbounded";
        r.work = unbounded::work_breakdown(sol.trajectory, task.epsilon);
        r.diagnostics = io::Diagnostics{sol.report.parameter, sol.report.residual, sol.report.iterations};
        if (traj_out) *traj_out = std::move(sol.trajectory);
        return r;
    }
    bounded::BoundedConfig cfg;
    cfg.shooting.samples = samples;
    r.tau_c1 = bounded::tau_c1(*task.lambda_max, task.epsilon);
    auto sol = bounded::solve_bounded(task, cfg);
    r.label = bounded::to_string(sol.label.kind);
    r.t_star = sol.label.t_star;
    r.work = sol.work;
    if (sol.touch) {
        r.diagnostics = io::Diagnostics{sol.touch->t_star, sol.touch->residual, sol.touch->iterations};
    } else if (sol.shooting) {
        r.diagnostics = io::Diagnostics{sol.shooting->parameter, sol.shooting->residual,
                                        sol.shooting->iterations};
    }
    if (with_tau_c2) {
        bounded::CriticalTimeOptions copt;
        copt.shooting = cfg.shooting;
        r.tau_c2 = bounded::tau_c2(*task.lambda_max, task.epsilon, copt);
    }
    if (traj_out) *traj_out = std::move(sol.trajectory);
    return r;
}

struct SolveFlags {
    double tau = 0.0;
    double epsilon = 0.0;
    std::optional<double> lambda_max;
    std::size_t samples = 1000;
    std::string out;
    std::string protocol_out;
    std::string json;
    bool no_tau_c2 = false;
};

inline int cmd_solve(const SolveFlags& f, std::ostream& out, std::ostream& err) {
    ResetTask task{f.tau, f.epsilon, f.lambda_max};
    io::RunResult r;
    r.tau = f.tau;
    r.epsilon = f.epsilon;
    r.lambda_max = f.lambda_max;
    int code = kOk;
    try {
        task.validate();
        Trajectory traj;
        r = solve_task(task, f.samples, !f.no_tau_c2, &traj);
        if (!f.out.empty()) {
            std::ostringstream os;
            io::write_trajectory_csv(os, traj);
            io::write_file(f.out, os.str());
            r.artifacts["trajectory"] = f.out;
        }
        if (!f.protocol_out.empty()) {
            std::ostringstream os;
            io::write_protocol_csv(os, traj);
            io::write_file(f.protocol_out, os.str());
            r.artifacts["protocol"] = f.protocol_out;
        }
    } catch (const InaccessibleError& e) {
        r.label = "inaccessible";
        r.reason = "inaccessible";
        r.tau_min = e.tau_min();
        if (f.lambda_max) r.tau_c1 = e.tau_min();
        err << "error: " << e.what() << '\n';
        code = kUnreachable;
    } catch (const InfeasibleError& e) {
        r.label = "infeasible";
        r.reason = "infeasible";
        r.lambda_threshold = e.lambda_threshold();
        err << "error: " << e.what() << '\n';
        code = kUnreachable;
    }
    if (!f.json.empty()) r.artifacts["json"] = f.json;
    emit(f.json, io::dump(io::to_json(r)), out);
    return code;
}

struct CriticalFlags {
    double lambda_max = 0.0;
    double epsilon = 0.0;
    std::string json;
};

inline int cmd_critical_times(const CriticalFlags& f, std::ostream& out, std::ostream& err) {
    nlohmann::json j;
    j["lambda_max"] = f.lambda_max;
    j["epsilon"] = f.epsilon;
    try {
        j["tau_c1"] = bounded::tau_c1(f.lambda_max, f.epsilon);
        j["tau_c2"] = bounded::tau_c2(f.lambda_max, f.epsilon);
    } catch (const InfeasibleError& e) {
        j["reason"] = "infeasible";
        j["lambda_threshold"] = e.lambda_threshold();
        err << "error: " << e.what() << '\n';
        emit(f.json, io::dump(j), out);
        return kUnreachable;
    }
    emit(f.json, io::dump(j), out);
    return kOk;
}

struct SweepFlags {
    std::optional<double> tau;
    std::optional<double> epsilon;
    std::optional<double> tau_min, tau_max, eps_min, eps_max;
    std::optional<double> lambda_max;
    int points = 10;
    bool log = false;
    int jobs = 1;
    std::string out;
};

inline io::SweepRow sweep_point(double tau, double eps, std::optional<double> lm) {
    io::SweepRow row{tau, eps, "", std::nullopt, std::nullopt};
    try {
        const io::RunResult r = solve_task({tau, eps, lm}, 2, false, nullptr);
        row.label = r.label;
        row.W_ex = r.work->W_ex;
        row.J = r.work->J;
    } catch (const InaccessibleError&) {
        row.label = "inaccessible";
    } catch (const InfeasibleError&) {
        row.label = "infeasible";
    } catch (const std::exception&) {
        row.label = "failed";
    }
    return row;
}

inline int cmd_sweep(const SweepFlags& f, std::ostream& out, std::ostream& err) {
    const bool tau_sweep = f.epsilon && f.tau_min && f.tau_max && !f.tau;
    const bool eps_sweep = f.tau && f.eps_min && f.eps_max && !f.epsilon;
    if (tau_sweep == eps_sweep) {
        err << "error: give either --epsilon with --tau-min/--tau-max, or --tau with "
               "--eps-min/--eps-max\n";
        return kFailure;
    }
    if (f.points < 1) {
        err << "error: --points must be >= 1\n";
        return kFailure;
    }
    const double lo = tau_sweep ? *f.tau_min : *f.eps_min;
    const double hi = tau_sweep ? *f.tau_max : *f.eps_max;
    if (!(lo > 0.0 && hi >= lo)) {
        err << "error: sweep range needs 0 < min <= max\n";
        return kFailure;
    }
    const auto rows = parallel_map<io::SweepRow>(
        static_cast<std::size_t>(f.points), f.jobs, [&](std::size_t i) {
            const double x = grid_value(lo, hi, static_cast<int>(i), f.points, f.log);
            return tau_sweep ? sweep_point(x, *f.epsilon, f.lambda_max)
                             : sweep_point(*f.tau, x, f.lambda_max);
        });
    std::ostringstream os;
    io::write_sweep_csv(os, rows);
    emit(f.out, os.str(), out);
    for (const auto& r : rows) {
        if (r.W_ex) return kOk;
    }
    err << "error: every sweep point failed\n";
    return kFailure;
}

struct CaseFlags {
    double lambda_max = 0.0;
    double tau_min = 1.0, tau_max = 150.0;
    double eps_min = 1e-6, eps_max = 1e-1;
    std::string grid = "50x50";
    int jobs = 1;
    std::string out;
    std::string boundary_out;
};

/// Label of one cell, without the touch time.
inline std::string case_label(double tau, double eps, double lm) {
    try {
        bounded::ClassifyOptions opt;
        opt.with_tau_c2 = false;
        opt.with_t_star = false;
        opt.solver.shooting.samples = 2;
        return bounded::to_string(bounded::classify({tau, eps, lm}, opt).kind);
    } catch (const InfeasibleError&) {
        return "infeasible";
    }
}

inline bool parse_grid(const std::string& s, int& n_tau, int& n_eps) {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) return false;
    try {
        std::size_t u1 = 0, u2 = 0;
        n_tau = std::stoi(s.substr(0, x), &u1);
        n_eps = std::stoi(s.substr(x + 1), &u2);
        return u1 == x && u2 == s.size() - x - 1 && n_tau >= 1 && n_eps >= 1;
    } catch (const std::exception&) {
        return false;
    }
}

inline int cmd_case_diagram(const CaseFlags& f, std::ostream& out, std::ostream& err) {
    int n_tau = 0, n_eps = 0;
    if (!parse_grid(f.grid, n_tau, n_eps)) {
        err << "error: --grid must look like NxM with N, M >= 1\n";
        return kFailure;
    }
    if (!(f.lambda_max > 0.0 && f.tau_min > 0.0 && f.tau_max >= f.tau_min && f.eps_min > 0.0 &&
          f.eps_max >= f.eps_min && f.eps_max < 0.5)) {
        err << "error: need lambda_max > 0, 0 < tau_min <= tau_max, 0 < eps_min <= eps_max < 1/2\n";
        return kFailure;
    }
    // rows: epsilon outer, tau inner
    const std::size_t cells = static_cast<std::size_t>(n_tau) * n_eps;
    const auto grid = parallel_map<io::CaseCell>(cells, f.jobs, [&](std::size_t k) {
        const int i = static_cast<int>(k % n_tau);
        const int j = static_cast<int>(k / n_tau);
        const double tau = grid_value(f.tau_min, f.tau_max, i, n_tau, false);
        const double eps = grid_value(f.eps_min, f.eps_max, j, n_eps, true);
        return io::CaseCell{tau, eps, case_label(tau, eps, f.lambda_max)};
    });
    std::ostringstream os;
    io::write_case_csv(os, grid);
    emit(f.out, os.str(), out);

    if (!f.boundary_out.empty()) {
        const auto pts = parallel_map<io::BoundaryPoint>(
            static_cast<std::size_t>(n_eps), f.jobs, [&](std::size_t j) {
                const double eps = grid_value(f.eps_min, f.eps_max, static_cast<int>(j), n_eps, true);
                io::BoundaryPoint b{eps, std::nan(""), std::nullopt};
                try {
                    b.tau_c1 = bounded::tau_c1(f.lambda_max, eps);
                    bounded::CriticalTimeOptions copt;
                    copt.shooting.samples = 2;
                    b.tau_c2 = bounded::tau_c2(f.lambda_max, eps, copt);
                } catch (const InfeasibleError&) {
                }
                return b;
            });
        std::ostringstream bs;
        io::write_boundary_csv(bs, pts);
        io::write_file(f.boundary_out, bs.str());
    }
    return kOk;
}

struct SimulateFlags {
    std::string protocol;
    double p0 = 0.5;
    std::size_t samples = 1000;
    std::string out;
    std::string json;
};

inline int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
    std::ifstream in(f.protocol, std::ios::binary);
    if (!in) {
        err << "error: cannot open protocol file '" << f.protocol << "'\n";
        return kFailure;
    }
    ControlProtocol proto;
    try {
        proto = io::read_protocol_csv(in);
    } catch (const io::FormatError& e) {
        err << "error: " << f.protocol << ": " << e.what() << '\n';
        return kFailure;
    }
    verify::SimulateConfig cfg;
    cfg.samples = f.samples;
    const Trajectory traj = verify::simulate(proto, f.p0, cfg);
    nlohmann::json j;
    j["p0"] = f.p0;
    j["tau"] = proto.total_duration();
    j["reset_error"] = verify::reset_error(traj);
    j["work_direct"] = verify::work_direct(traj);
    j["work_objective"] = unbounded::objective(traj);
    nlohmann::json artifacts = nlohmann::json::object();
    if (!f.out.empty()) {
        std::ostringstream os;
        io::write_trajectory_csv(os, traj);
        io::write_file(f.out, os.str());
        artifacts["trajectory"] = f.out;
    }
    if (!f.json.empty()) artifacts["json"] = f.json;
    j["artifacts"] = artifacts;
    emit(f.json, io::dump(j), out);
    return kOk;
}

} // namespace detail

/// Full command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Minimum-work qubit reset: optimal gap protocols, critical times, sweeps."};
    app.footer(kUnitsNote);
    app.require_subcommand(1);

    detail::SolveFlags solve;
    auto* s = app.add_subcommand("solve", "Optimal protocol for one (tau, epsilon[, lambda_max])");
    s->add_option("--tau", solve.tau, "Reset time gamma*tau")->required();
    s->add_option("--epsilon", solve.epsilon, "Target excited population")->required();
    s->add_option("--lambda-max", solve.lambda_max, "Gap bound beta*lambda_max");
    s->add_option("--samples", solve.samples, "Trajectory samples")->check(CLI::PositiveNumber);
    s->add_option("--out", solve.out, "Trajectory CSV (t,p_e,lambda_H)");
    s->add_option("--protocol-out", solve.protocol_out, "Protocol CSV (t,lambda_H)");
    s->add_option("--json", solve.json, "Result JSON (stdout when omitted)");
    s->add_flag("--no-tau-c2", solve.no_tau_c2, "Skip the tau_c2 root solve for bounded tasks");
    s->footer(kUnitsNote);

    detail::CriticalFlags crit;
    auto* c = app.add_subcommand("critical-times", "tau_c1 and tau_c2 for a gap bound");
    c->add_option("--lambda-max", crit.lambda_max, "Gap bound beta*lambda_max")->required();
    c->add_option("--epsilon", crit.epsilon, "Target excited population")->required();
    c->add_option("--json", crit.json, "Output JSON (stdout when omitted)");
    c->footer(kUnitsNote);

    detail::SweepFlags sweep;
    auto* w = app.add_subcommand("sweep", "Extra work over a tau grid or an epsilon grid");
    w->add_option("--tau", sweep.tau, "Fixed reset time (epsilon sweep)");
    w->add_option("--epsilon", sweep.epsilon, "Fixed target error (tau sweep)");
    w->add_option("--tau-min", sweep.tau_min);
    w->add_option("--tau-max", sweep.tau_max);
    w->add_option("--eps-min", sweep.eps_min);
    w->add_option("--eps-max", sweep.eps_max);
    w->add_option("--lambda-max", sweep.lambda_max, "Gap bound beta*lambda_max");
    w->add_option("--points", sweep.points, "Grid points");
    w->add_flag("--log", sweep.log, "Log-spaced grid");
    w->add_option("--jobs", sweep.jobs, "Worker threads")->check(CLI::PositiveNumber);
    w->add_option("--out", sweep.out, "Sweep CSV (stdout when omitted)");
    w->footer(kUnitsNote);

    detail::CaseFlags cases;
    auto* d = app.add_subcommand("case-diagram", "Inaccessible/touched/untouched labels on a grid");
    d->add_option("--lambda-max", cases.lambda_max, "Gap bound beta*lambda_max")->required();
    d->add_option("--tau-min", cases.tau_min);
    d->add_option("--tau-max", cases.tau_max);
    d->add_option("--eps-min", cases.eps_min);
    d->add_option("--eps-max", cases.eps_max);
    d->add_option("--grid", cases.grid, "NxM: N tau points (linear) by M epsilon points (log)");
    d->add_option("--jobs", cases.jobs, "Worker threads")->check(CLI::PositiveNumber);
    d->add_option("--out", cases.out, "Case CSV (stdout when omitted)");
    d->add_option("--boundary-out", cases.boundary_out, "CSV of tau_c1(eps), tau_c2(eps)");
    d->footer(kUnitsNote);

    detail::SimulateFlags sim;
    auto* m = app.add_subcommand("simulate", "Forward-simulate a protocol CSV");
    m->add_option("--protocol", sim.protocol, "Protocol CSV (t,lambda_H)")->required();
    m->add_option("--p0", sim.p0, "Initial excited population");
    m->add_option("--samples", sim.samples, "Trajectory samples")->check(CLI::PositiveNumber);
    m->add_option("--out", sim.out, "Trajectory CSV");
    m->add_option("--json", sim.json, "Result JSON (stdout when omitted)");
    m->footer(kUnitsNote);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kFailure;
    }

    try {
        if (s->parsed()) return detail::cmd_solve(solve, out, err);
        if (c->parsed()) return detail::cmd_critical_times(crit, out, err);
        if (w->parsed()) return detail::cmd_sweep(sweep, out, err);
        if (d->parsed()) return detail::cmd_case_diagram(cases, out, err);
        if (m->parsed()) return detail::cmd_simulate(sim, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}

} // namespace qreset::cli
