// Command-line entry point: load problem files, dispatch solves and checks,
// write CSV/JSON artifacts.
//
// Exit codes: 0 success, 1 quantitative check failure or unconverged
// truncation, 2 usage/configuration errors.

#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "isaacs/checks.hpp"
#include "isaacs/io.hpp"
#include "isaacs/mc.hpp"
#include "isaacs/parallel.hpp"
#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

namespace {

using namespace isaacs;

struct RunConfig {
    std::string subcommand;
    std::string problem_path;
    std::string out_dir = "out";
    double tol = 0.0;           // 0 = use the problem file's value
    std::int64_t seed = -1;     // <0 = use the problem file's value
    unsigned threads = 0;       // 0 = default
    std::vector<std::string> overrides; // "section.key=value"
};

std::vector<std::pair<std::string, std::string>> split_overrides(const RunConfig& rc) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& item : rc.overrides) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + item + "' must have the form section.key=value");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

ProblemFile load(const RunConfig& rc) {
    std::ifstream in(rc.problem_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open problem file '" + rc.problem_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    ProblemFile pf = load_problem(buf.str(), split_overrides(rc));
    if (rc.tol > 0) pf.solver.tol = rc.tol;
    if (rc.seed >= 0) pf.solver.seed = static_cast<std::uint64_t>(rc.seed);
    return pf;
}

std::string timestamp() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void ensure_outdir(const RunConfig& rc) {
    std::filesystem::create_directories(rc.out_dir);
}

std::string artifact(const RunConfig& rc, const std::string& name) {
    return (std::filesystem::path(rc.out_dir) / name).string();
}

AssumptionReport estimate(const ProblemFile& pf) {
    StateBox box{pf.grid.lo, pf.grid.hi};
    return estimate_constants(pf.problem, box, pf.solver.est_samples, pf.solver.seed,
                              pf.solver.quad_window);
}

SolveControls controls_from(const ProblemFile& pf, const AssumptionReport& rep) {
    SolveControls c;
    c.tol = pf.solver.tol;
    c.horizon_step = pf.solver.horizon_step;
    c.horizon_cap = pf.solver.horizon_cap;
    c.rho0 = rep.rho0;
    c.L_y = rep.L_y;
    return c;
}

FieldKind parse_kind(const std::string& kind) {
    if (kind == "lower") return FieldKind::Lower;
    if (kind == "upper") return FieldKind::Upper;
    throw ConfigError("--kind must be lower or upper");
}

nlohmann::json run_header(const RunConfig& rc) {
    nlohmann::json j;
    j["problem"] = rc.problem_path;
    j["generated_at"] = timestamp(); // the only timestamp in any artifact
    return j;
}

std::vector<double> center_grid_point(const GridSpec& grid) {
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (int i = 0; i < grid.dim(); ++i) {
        int mid = (grid.points[static_cast<std::size_t>(i)] - 1) / 2;
        x[static_cast<std::size_t>(i)] = grid.lo[static_cast<std::size_t>(i)] + mid * grid.step(i);
    }
    return x;
}

int cmd_report_constants(const RunConfig& rc) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    ensure_outdir(rc);
    nlohmann::json j = run_header(rc);
    j["assumptions"] = assumption_json(rep);
    if (rep.rho0 > 0) j["bounds"] = bounds_json(value_bounds(rep));
    j["autonomous"] = pf.problem.autonomous_flag;
    write_json(j, artifact(rc, "constants.json"));
    std::cout << j["assumptions"].dump(2) << "\n";
    if (!(rep.rho0 > 0)) {
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0 << "\n";
        return 2;
    }
    return 0;
}

int cmd_solve_finite(const RunConfig& rc, double T, const std::string& kind) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    SolveControls ctl = controls_from(pf, rep);
    ValueField field = solve_finite(pf.problem, pf.grid, T, parse_kind(kind), ctl);
    ensure_outdir(rc);
    write_field_csv(field, artifact(rc, "field_" + kind + ".csv"));
    nlohmann::json j = run_header(rc);
    j["field"] = field_meta_json(field);
    write_json(j, artifact(rc, "meta_" + kind + ".json"));
    std::cout << "solved T=" << T << ", layers=" << field.layers
              << ", dt=" << field.meta.dt << "\n";
    return 0;
}

int cmd_solve_infinite(const RunConfig& rc, const std::string& kind) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    if (!(rep.rho0 > 0)) {
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0 << "\n";
        return 2;
    }
    SolveControls ctl = controls_from(pf, rep);
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, parse_kind(kind), ctl);
    ensure_outdir(rc);
    write_field_csv(res.field, artifact(rc, "field_" + kind + ".csv"));
    nlohmann::json j = run_header(rc);
    j["field"] = field_meta_json(res.field);
    write_json(j, artifact(rc, "meta_" + kind + ".json"));
    write_json(trace_json(res.trace), artifact(rc, "trace_" + kind + ".json"));
    std::cout << "horizon " << res.field.meta.horizon << ", tail bound "
              << res.trace.tail_bound << (res.trace.converged ? "" : " (NOT converged)")
              << "\n";
    return res.trace.converged ? 0 : 1;
}

int cmd_solve_stationary(const RunConfig& rc, const std::string& kind) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    SolveControls ctl = controls_from(pf, rep);
    ValueField field = solve_stationary(pf.problem, pf.grid, parse_kind(kind), ctl);
    ensure_outdir(rc);
    write_field_csv(field, artifact(rc, "field_stationary.csv"));
    nlohmann::json j = run_header(rc);
    j["field"] = field_meta_json(field);
    write_json(j, artifact(rc, "meta_stationary.json"));
    std::cout << "stationary solve done, dt=" << field.meta.dt << "\n";
    return 0;
}

int cmd_solve_transformed(const RunConfig& rc) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    if (!(rep.rho0 > 0)) {
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0 << "\n";
        return 2;
    }
    SolveControls ctl = controls_from(pf, rep);
    InfiniteSolveResult res = solve_transformed(pf.problem, pf.grid, ctl);
    ensure_outdir(rc);
    write_field_csv(res.field, artifact(rc, "field_transformed.csv"));
    nlohmann::json j = run_header(rc);
    j["field"] = field_meta_json(res.field);
    write_json(j, artifact(rc, "meta_transformed.json"));
    write_json(trace_json(res.trace), artifact(rc, "trace_transformed.json"));
    std::cout << "transform discrepancy vs direct solve: "
              << res.field.meta.transform_discrepancy << "\n";
    return res.trace.converged ? 0 : 1;
}

int cmd_bsde(const RunConfig& rc, double t0, const std::string& x0_csv, double T, int policy_u,
             int policy_v, const std::string& terminal, const std::string& exit_lo,
             const std::string& exit_hi, bool save_paths) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    if (!(rep.rho0 > 0)) {
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0 << "\n";
        return 2;
    }

    auto parse_csv = [](const std::string& text) {
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t next = text.find(',', pos);
            if (next == std::string::npos) next = text.size();
            out.push_back(std::stod(text.substr(pos, next - pos)));
            pos = next + 1;
        }
        return out;
    };
    std::vector<double> x0 = x0_csv.empty() ? center_grid_point(pf.grid) : parse_csv(x0_csv);

    ControlPolicy policy = ControlPolicy::constant_pair(policy_u, policy_v);
    McRunOptions mc;
    mc.dt = pf.solver.mc_dt;
    mc.paths = pf.solver.mc_paths;
    mc.seed = pf.solver.seed;
    mc.horizon_step = pf.solver.horizon_step;
    mc.horizon_cap = pf.solver.horizon_cap;
    mc.rho0 = rep.rho0;

    std::optional<StateBox> exit_box;
    if (!exit_lo.empty() || !exit_hi.empty())
        exit_box = StateBox{parse_csv(exit_lo), parse_csv(exit_hi)};

    ensure_outdir(rc);
    nlohmann::json j = run_header(rc);
    int code = 0;
    if (T > 0) {
        std::optional<Expr> psi;
        if (!terminal.empty() && terminal != "zero") psi = Expr::parse(terminal);
        PathBundle bundle =
            simulate_paths(pf.problem, policy, t0, x0, mc.dt, T, mc.paths, mc.seed, exit_box);
        BsdeEstimate est = solve_bsde_truncated(bundle, pf.problem, policy, T,
                                                psi ? &*psi : nullptr);
        j["estimate"] = bsde_json(est);
        if (save_paths) write_path_bundle(bundle, artifact(rc, "paths.ihpb"));
        std::cout << "Y0 = " << est.y0 << " +- " << est.se << "\n";
    } else {
        if (exit_box) {
            std::cerr << "infinite-horizon estimation uses zero terminal data without an "
                         "exit box\n";
            return 2;
        }
        InfiniteBsdeResult res =
            estimate_infinite(pf.problem, policy, t0, x0, pf.solver.tol, mc);
        j["estimate"] = bsde_json(res.estimate);
        j["horizons"] = res.horizons;
        j["y0s"] = res.y0s;
        j["deltas"] = res.deltas;
        j["tail_bound"] = res.tail_bound;
        j["converged"] = res.converged;
        std::cout << "Y0 = " << res.estimate.y0 << " (tail bound " << res.tail_bound << ")"
                  << (res.converged ? "" : " NOT converged") << "\n";
        code = res.converged ? 0 : 1;
    }
    write_json(j, artifact(rc, "bsde.json"));
    return code;
}

int cmd_isaacs_scan(const RunConfig& rc) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    if (!(rep.rho0 > 0)) {
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0 << "\n";
        return 2;
    }
    SolveControls ctl = controls_from(pf, rep);
    InfiniteSolveResult lower = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    GapScan scan = isaacs_scan(pf.problem, lower.field);
    ensure_outdir(rc);
    nlohmann::json j = run_header(rc);
    j["max_gap"] = scan.max_gap;
    j["at_t"] = scan.t;
    j["at_x"] = scan.x;
    write_json(j, artifact(rc, "scan.json"));
    std::cout << "max Isaacs gap " << scan.max_gap << " at t=" << scan.t << "\n";
    return 0;
}

int cmd_check_all(const RunConfig& rc) {
    ProblemFile pf = load(rc);
    AssumptionReport rep = estimate(pf);
    ensure_outdir(rc);

    nlohmann::json j = run_header(rc);
    j["assumptions"] = assumption_json(rep);
    if (!(rep.rho0 > 0)) {
        write_json(j, artifact(rc, "checks.json"));
        std::cerr << "discount assumption failed: estimated rho0 = " << rep.rho0
                  << " (rho must be bounded below by a positive constant)\n";
        return 2;
    }
    Bounds bounds = value_bounds(rep);
    j["bounds"] = bounds_json(bounds);
    double scheme_slack = std::max(1e-12, pf.solver.scheme_slack_factor * bounds.M1_inf);

    SolveControls ctl = controls_from(pf, rep);
    InfiniteSolveResult lower = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    bool control_free = pf.problem.control_free();
    InfiniteSolveResult upper =
        control_free ? lower : solve_infinite(pf.problem, pf.grid, FieldKind::Upper, ctl);

    write_field_csv(lower.field, artifact(rc, "field_lower.csv"));
    write_field_csv(upper.field, artifact(rc, "field_upper.csv"));
    write_json(trace_json(lower.trace), artifact(rc, "trace_lower.json"));

    std::vector<CheckReport> reports;
    auto note_artifacts = [&](CheckReport r) {
        r.artifacts = {artifact(rc, "field_lower.csv"), artifact(rc, "trace_lower.json")};
        reports.push_back(std::move(r));
    };

    if (!lower.trace.converged || !upper.trace.converged) {
        CheckReport r;
        r.name = "truncation-converged";
        r.inequality = "delta_k <= tol before the horizon cap";
        r.measured = lower.trace.deltas.empty() ? 0.0 : lower.trace.deltas.back();
        r.bound = ctl.tol;
        r.pass = false;
        note_artifacts(std::move(r));
    }

    try {
        note_artifacts(check_truncation_rate(lower.trace, rep.rho0, pf.solver.rate_slack));
    } catch (const ConfigError& e) {
        CheckReport r;
        r.name = "truncation-rate";
        r.skipped = true;
        r.pass = true;
        r.detail = e.what();
        note_artifacts(std::move(r));
    }
    note_artifacts(check_bounds(lower.field, bounds, pf.solver.bound_slack));
    if (!control_free) note_artifacts(check_bounds(upper.field, bounds, pf.solver.bound_slack));
    note_artifacts(check_lipschitz(lower.field, bounds, pf.solver.lipschitz_slack));
    for (auto& r : check_boundary_decay(pf.problem, lower.field, bounds, rep, scheme_slack,
                                        pf.solver.quad_window))
        note_artifacts(std::move(r));

    if (pf.problem.autonomous_flag) {
        ValueField stat = solve_stationary(pf.problem, pf.grid, FieldKind::Lower, ctl);
        write_field_csv(stat, artifact(rc, "field_stationary.csv"));
        for (auto& r : check_stationarity(lower.field, stat, ctl.tol, scheme_slack))
            note_artifacts(std::move(r));
    }

    GapScan scan = isaacs_scan(pf.problem, lower.field);
    note_artifacts(check_isaacs_value(lower.field, upper.field, scan, scheme_slack));

    if (control_free) {
        ControlPolicy policy = ControlPolicy::constant_pair(0, 0);
        McRunOptions mc;
        mc.dt = pf.solver.mc_dt;
        mc.paths = pf.solver.mc_paths;
        mc.seed = pf.solver.seed;
        mc.horizon_step = pf.solver.horizon_step;
        mc.horizon_cap = pf.solver.horizon_cap;
        mc.rho0 = rep.rho0;
        std::vector<double> x0 = center_grid_point(pf.grid);
        InfiniteBsdeResult mc_res =
            estimate_infinite(pf.problem, policy, 0.0, x0, ctl.tol, mc);
        write_json(bsde_json(mc_res.estimate), artifact(rc, "bsde.json"));
        note_artifacts(cross_validate(lower.field, mc_res.estimate, x0, scheme_slack));
    }

    j["checks"] = checks_json(reports);
    bool ok = all_passed(reports);
    j["all_passed"] = ok;
    write_json(j, artifact(rc, "checks.json"));

    for (const auto& r : reports) {
        const char* tag = r.skipped ? "SKIP" : (r.informational ? "INFO" : (r.pass ? "PASS" : "FAIL"));
        std::cout << "[" << tag << "] " << r.name << ": measured " << r.measured
                  << " vs bound " << r.bound << " + slack " << r.slack << "\n";
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"infinite-horizon HJBI game solver and verification suite"};
    app.require_subcommand(1);

    RunConfig rc;
    double T = 4.0;
    std::string kind = "lower";
    double t0 = 0.0;
    std::string x0_csv;
    double bsde_T = 0.0;
    int policy_u = 0, policy_v = 0;
    std::string terminal, exit_lo, exit_hi;
    bool save_paths = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--problem", rc.problem_path, "problem file")->required();
        cmd->add_option("--out", rc.out_dir, "output directory");
        cmd->add_option("--tol", rc.tol, "override solver tolerance");
        cmd->add_option("--seed", rc.seed, "override RNG seed");
        cmd->add_option("--threads", rc.threads, "cap worker threads");
        cmd->add_option("--set", rc.overrides, "override problem keys, section.key=value");
    };

    CLI::App* sf = app.add_subcommand("solve-finite", "one backward march to horizon T");
    add_common(sf);
    sf->add_option("--T", T, "truncation horizon")->required();
    sf->add_option("--kind", kind, "lower|upper");

    CLI::App* si = app.add_subcommand("solve-infinite", "horizon continuation to tolerance");
    add_common(si);
    si->add_option("--kind", kind, "lower|upper");

    CLI::App* ss = app.add_subcommand("solve-stationary", "autonomous stationary equation");
    add_common(ss);
    ss->add_option("--kind", kind, "lower|upper");

    CLI::App* st = app.add_subcommand("solve-transformed", "discount-transformed solve");
    add_common(st);

    CLI::App* bs = app.add_subcommand("bsde", "Monte-Carlo BSDE estimate for a frozen policy");
    add_common(bs);
    bs->add_option("--t0", t0, "initial time");
    bs->add_option("--x0", x0_csv, "initial state, comma separated");
    bs->add_option("--T", bsde_T, "finite horizon; omit for infinite-horizon estimation");
    bs->add_option("--policy-u", policy_u, "control index for player 1");
    bs->add_option("--policy-v", policy_v, "control index for player 2");
    bs->add_option("--terminal", terminal, "terminal expression psi(x), default zero");
    bs->add_option("--exit-lo", exit_lo, "exit box lower corner, comma separated");
    bs->add_option("--exit-hi", exit_hi, "exit box upper corner, comma separated");
    bs->add_flag("--save-paths", save_paths, "persist the simulated bundle");

    CLI::App* ca = app.add_subcommand("check-all", "run the full inequality suite");
    add_common(ca);

    CLI::App* is = app.add_subcommand("isaacs-scan", "scan the Hamiltonian gap over the grid");
    add_common(is);

    CLI::App* rp = app.add_subcommand("report-constants", "estimate assumption constants");
    add_common(rp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (rc.threads == 0) {
        if (const char* env = std::getenv("ISAACS_HORIZON_THREADS"))
            rc.threads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
    set_max_threads(rc.threads);

    try {
        if (sf->parsed()) return cmd_solve_finite(rc, T, kind);
        if (si->parsed()) return cmd_solve_infinite(rc, kind);
        if (ss->parsed()) return cmd_solve_stationary(rc, kind);
        if (st->parsed()) return cmd_solve_transformed(rc);
        if (bs->parsed())
            return cmd_bsde(rc, t0, x0_csv, bsde_T, policy_u, policy_v, terminal, exit_lo,
                            exit_hi, save_paths);
        if (ca->parsed()) return cmd_check_all(rc);
        if (is->parsed()) return cmd_isaacs_scan(rc);
        if (rp->parsed()) return cmd_report_constants(rc);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
