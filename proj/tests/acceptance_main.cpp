// Acceptance suite: runs every shipped problem through the solver stack and
// certifies the quantitative guarantees end to end, one PASS/FAIL line per
// criterion. Exit code 0 iff everything passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isaacs/checks.hpp"
#include "isaacs/hamiltonian.hpp"
#include "isaacs/mc.hpp"
#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

using namespace isaacs;

namespace {

struct Gate {
    int failures = 0;

    void line(const std::string& id, bool pass, const std::string& detail) {
        std::printf("%-6s %-34s %s  %s\n", id.c_str(), "", pass ? "PASS" : "FAIL",
                    detail.c_str());
        if (!pass) ++failures;
    }
    void line(const std::string& id, const std::string& what, bool pass,
              const std::string& detail) {
        std::printf("%-6s %-34s %s  %s\n", id.c_str(), what.c_str(), pass ? "PASS" : "FAIL",
                    detail.c_str());
        if (!pass) ++failures;
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Run {
    std::string name;
    ProblemFile pf;
    AssumptionReport rep;
    Bounds bounds;
    InfiniteSolveResult lower;
    InfiniteSolveResult upper; // == lower for control-free problems
    double solve_seconds = 0.0;
    double scheme_slack = 0.0;
};

Run solve_problem(const std::string& dir, const std::string& name) {
    Run run;
    run.name = name;
    std::ifstream in(dir + "/" + name + ".toml", std::ios::binary);
    if (!in) throw ConfigError("cannot open problem " + name + " under " + dir);
    std::ostringstream buf;
    buf << in.rdbuf();
    run.pf = load_problem(buf.str());
    run.rep = estimate_constants(run.pf.problem, StateBox{run.pf.grid.lo, run.pf.grid.hi},
                                 run.pf.solver.est_samples, run.pf.solver.seed,
                                 run.pf.solver.quad_window);
    run.bounds = value_bounds(run.rep);
    run.scheme_slack = std::max(1e-12, run.pf.solver.scheme_slack_factor * run.bounds.M1_inf);

    SolveControls ctl;
    ctl.tol = run.pf.solver.tol;
    ctl.horizon_step = run.pf.solver.horizon_step;
    ctl.horizon_cap = run.pf.solver.horizon_cap;
    ctl.rho0 = run.rep.rho0;
    ctl.L_y = run.rep.L_y;

    auto start = std::chrono::steady_clock::now();
    run.lower = solve_infinite(run.pf.problem, run.pf.grid, FieldKind::Lower, ctl);
    run.upper = run.pf.problem.control_free()
                    ? run.lower
                    : solve_infinite(run.pf.problem, run.pf.grid, FieldKind::Upper, ctl);
    run.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

SolveControls controls_of(const Run& run) {
    SolveControls ctl;
    ctl.tol = run.pf.solver.tol;
    ctl.horizon_step = run.pf.solver.horizon_step;
    ctl.horizon_cap = run.pf.solver.horizon_cap;
    ctl.rho0 = run.rep.rho0;
    ctl.L_y = run.rep.L_y;
    return ctl;
}

McRunOptions mc_options_of(const Run& run) {
    McRunOptions mc;
    mc.dt = run.pf.solver.mc_dt;
    mc.paths = run.pf.solver.mc_paths;
    mc.seed = run.pf.solver.seed;
    mc.horizon_step = run.pf.solver.horizon_step;
    mc.horizon_cap = run.pf.solver.horizon_cap;
    mc.rho0 = run.rep.rho0;
    return mc;
}

// The closed-form anchor problem: b = sigma = 0, rho = 1, g = exp(-t),
// whose exact value is Y_t = exp(-t)/2.
const char* kClosedForm = R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "0"
sigma11 = "0"
[generator]
g = "exp(-t)"
[discount]
rho = "1"
[growth]
beta1 = "exp(-t)"
beta1_tail_c = 1.0
beta1_tail_lambda = 1.0
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-1]
hi = [1]
points = [5]
window = 1.0
dt = 0.001
)cfg";

const char* kBilinearGap = R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "u1*v1"
sigma11 = "1"
[generator]
g = "0"
[discount]
rho = "1"
[growth]
beta2 = 0
[controls]
U = [[-1], [1]]
V = [[-1], [1]]
)cfg";

} // namespace

int main(int argc, char** argv) {
    std::string dir = "problems";
    for (int i = 1; i + 1 < argc; i += 2)
        if (std::string(argv[i]) == "--problems-dir") dir = argv[i + 1];

    Gate gate;
    const std::vector<std::string> names = {"ou_zdrift",     "separable_game", "dissipative_1d",
                                            "beta_decay",    "rho_half_game",  "nonauto_rho",
                                            "ou_2d"};
    std::map<std::string, Run> runs;
    try {
        for (const auto& name : names) runs.emplace(name, solve_problem(dir, name));
    } catch (const std::exception& e) {
        std::cerr << "setup failure: " << e.what() << "\n";
        return 1;
    }

    // ---- AC-1: uniform bound on every shipped problem -----------------------
    for (const auto& [name, run] : runs) {
        CheckReport r = check_bounds(run.lower.field, run.bounds, run.pf.solver.bound_slack);
        bool timing = run.solve_seconds < 60.0;
        gate.line("AC-1", "uniform bound, " + name, r.pass && timing && run.lower.trace.converged,
                  "max|W| " + fmt(r.measured) + " <= " + fmt(r.bound + r.slack) + ", " +
                      fmt(run.solve_seconds) + "s");
    }

    // ---- AC-2: truncation decay rate ----------------------------------------
    for (const auto& [name, run] : runs) {
        try {
            CheckReport r =
                check_truncation_rate(run.lower.trace, run.rep.rho0, run.pf.solver.rate_slack);
            bool timing = run.solve_seconds < 120.0;
            gate.line("AC-2", "truncation rate, " + name, r.pass && timing,
                      "slope " + fmt(r.measured) + " <= " + fmt(r.bound) + " (rho0 " +
                          fmt(run.rep.rho0) + ")");
        } catch (const std::exception& e) {
            gate.line("AC-2", "truncation rate, " + name, false, e.what());
        }
    }

    // ---- AC-3: Isaacs value on separable games, bilinear counterexample -----
    for (const std::string name : {"separable_game", "rho_half_game"}) {
        const Run& run = runs.at(name);
        GapScan scan = isaacs_scan(run.pf.problem, run.lower.field);
        CheckReport r =
            check_isaacs_value(run.lower.field, run.upper.field, scan, run.scheme_slack);
        bool gap_exact = scan.max_gap == 0.0;
        gate.line("AC-3", "Isaacs value, " + name, gap_exact && r.pass && !r.informational,
                  "gap " + fmt(scan.max_gap) + ", |lower-upper| " + fmt(r.measured) +
                      " <= " + fmt(r.slack));
    }
    {
        GameProblem bil = load_problem(kBilinearGap).problem;
        HamiltonianInput in(0.0, {0.0}, 0.0, {1.0}, {0.0});
        double gap = isaacs_gap(bil, in);
        gate.line("AC-3", "bilinear drift gap at p=1", gap == 2.0, "gap " + fmt(gap));
    }

    // ---- AC-4: value Lipschitz bound on the dissipative problem -------------
    {
        const Run& run = runs.at("dissipative_1d");
        CheckReport r =
            check_lipschitz(run.lower.field, run.bounds, run.pf.solver.lipschitz_slack);
        gate.line("AC-4", "Lipschitz bound, dissipative_1d", r.pass && !r.skipped,
                  "slope " + fmt(r.measured) + " <= " + fmt(r.bound + r.slack) + " (Lip_W " +
                      fmt(r.bound) + ")");
    }

    // ---- AC-5: stationarity of autonomous problems --------------------------
    for (const std::string name : {"separable_game", "dissipative_1d", "rho_half_game"}) {
        const Run& run = runs.at(name);
        ValueField stat =
            solve_stationary(run.pf.problem, run.pf.grid, FieldKind::Lower, controls_of(run));
        auto rs = check_stationarity(run.lower.field, stat, run.pf.solver.tol, run.scheme_slack);
        gate.line("AC-5", "stationarity, " + name, rs[0].pass && rs[1].pass,
                  "drift-in-t " + fmt(rs[0].measured) + ", |W(0)-w| " + fmt(rs[1].measured) +
                      " <= " + fmt(rs[0].slack));
    }

    // ---- AC-6: PDE <-> BSDE cross-validation --------------------------------
    {
        const Run& run = runs.at("ou_zdrift");
        McRunOptions mc = mc_options_of(run); // N = 10^4, dt = 0.01 from the problem file
        ControlPolicy policy = ControlPolicy::constant_pair(0, 0);
        std::vector<double> x0{0.0};
        InfiniteBsdeResult est =
            estimate_infinite(run.pf.problem, policy, 0.0, x0, run.pf.solver.tol, mc);
        CheckReport r = cross_validate(run.lower.field, est.estimate, x0, run.scheme_slack);
        gate.line("AC-6", "cross-validation, ou_zdrift", r.pass && est.converged,
                  "|W-Y0| " + fmt(r.measured) + " <= " + fmt(r.slack) + " (N " +
                      std::to_string(mc.paths) + ", dt " + fmt(mc.dt) + ")");

        // Closed-form sub-case: both solvers must yield 0.5 +- 1e-3.
        ProblemFile cf = load_problem(kClosedForm);
        AssumptionReport cf_rep =
            estimate_constants(cf.problem, StateBox{cf.grid.lo, cf.grid.hi}, 500, 1);
        SolveControls cf_ctl;
        cf_ctl.rho0 = cf_rep.rho0;
        cf_ctl.tol = 1e-4;
        InfiniteSolveResult pde = solve_infinite(cf.problem, cf.grid, FieldKind::Lower, cf_ctl);
        McRunOptions cf_mc;
        cf_mc.dt = 0.001;
        cf_mc.paths = 16;
        cf_mc.seed = 5;
        cf_mc.rho0 = 1.0;
        InfiniteBsdeResult cf_est =
            estimate_infinite(cf.problem, policy, 0.0, x0, 1e-4, cf_mc);
        double w = pde.field.interpolate(0, x0);
        bool ok = std::fabs(w - 0.5) <= 1e-3 && std::fabs(cf_est.estimate.y0 - 0.5) <= 1e-3;
        gate.line("AC-6", "closed-form sub-case, both solvers", ok,
                  "PDE " + fmt(w) + ", MC " + fmt(cf_est.estimate.y0) + " vs 0.5 +- 1e-3");
    }

    // ---- AC-7: terminal-time stability (MC) ----------------------------------
    {
        const Run& run = runs.at("ou_zdrift");
        ControlPolicy policy = ControlPolicy::constant_pair(0, 0);
        McRunOptions mc = mc_options_of(run);
        for (double S : {2.0, 4.0}) {
            PathBundle bundle = simulate_paths(run.pf.problem, policy, 0.0, {0.0}, mc.dt,
                                               2.0 * S, mc.paths, mc.seed);
            BsdeEstimate y1 =
                solve_bsde_truncated(bundle, run.pf.problem, policy, S, nullptr);
            BsdeEstimate y2 =
                solve_bsde_truncated(bundle, run.pf.problem, policy, 2.0 * S, nullptr);
            double measured = std::fabs(y1.y0 - y2.y0);
            double bound = std::exp(-run.rep.rho0 * S) * (0.0 + run.bounds.M1_inf) +
                           3.0 * (y1.se + y2.se);
            gate.line("AC-7", "terminal-time stability, S=" + fmt(S), measured <= bound,
                      "|dY0| " + fmt(measured) + " <= " + fmt(bound));
        }
    }

    // ---- AC-8: generator perturbation (MC, common random numbers) -----------
    // Run on the time-varying-discount problem: there int Gamma < 1/rho0
    // strictly, so eps/rho0 certifies with real margin. (At rho == rho0 the
    // bound is attained exactly and regression noise sits on the boundary.)
    {
        const Run& run = runs.at("nonauto_rho");
        ControlPolicy policy = ControlPolicy::constant_pair(0, 0);
        McRunOptions mc = mc_options_of(run);
        const double eps = 0.05;
        std::ifstream in(dir + "/nonauto_rho.toml", std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        ProblemFile bumped = load_problem(
            buf.str(), {{"generator.g", "\"exp(-0.5*t)*sin(x1) + 0.2*(u1-v1) + 0.05\""},
                        {"growth.beta2", "0.45"}});
        InfiniteBsdeResult a =
            estimate_infinite(run.pf.problem, policy, 0.0, {0.0}, run.pf.solver.tol, mc);
        InfiniteBsdeResult b =
            estimate_infinite(bumped.problem, policy, 0.0, {0.0}, run.pf.solver.tol, mc);
        double measured = std::fabs(a.estimate.y0 - b.estimate.y0);
        double bound = eps / run.rep.rho0 + 3.0 * (a.estimate.se + b.estimate.se);
        gate.line("AC-8", "generator perturbation eps=0.05", measured <= bound,
                  "|dY0| " + fmt(measured) + " <= " + fmt(bound) + " (rho0 " +
                      fmt(run.rep.rho0) + ")");
    }

    // ---- AC-9: transform equivalence -----------------------------------------
    {
        const Run& run = runs.at("ou_zdrift");
        InfiniteSolveResult tr =
            solve_transformed(run.pf.problem, run.pf.grid, controls_of(run));
        bool ok = tr.trace.converged && tr.field.meta.transform_discrepancy <= 1e-3 &&
                  tr.field.meta.transform_t0_bitexact;
        gate.line("AC-9", "transform equivalence, ou_zdrift", ok,
                  "sup discrepancy " + fmt(tr.field.meta.transform_discrepancy) + " <= 0.001");
    }

    // ---- AC-10: boundary decay with beta2 = 0 --------------------------------
    {
        const Run& run = runs.at("beta_decay");
        bool all_ok = true;
        std::string detail;
        for (double t : {0.0, 1.0, 2.0, 4.0}) {
            int layer = run.lower.field.layer_of_t(t);
            double sup = 0.0;
            std::size_t npts = run.lower.field.num_points();
            for (std::size_t pt = 0; pt < npts; ++pt)
                sup = std::max(sup, std::fabs(run.lower.field.at(layer, pt)));
            double bound = std::exp(-t) + run.scheme_slack; // int_t^inf beta1 = e^{-t}
            all_ok = all_ok && sup <= bound;
            detail += (detail.empty() ? "" : ", ") + ("t" + fmt(t) + ":" + fmt(sup));
        }
        gate.line("AC-10", "undiscounted decay, beta_decay", all_ok,
                  detail + " vs exp(-t)+" + fmt(run.scheme_slack));
    }

    std::printf("\n%d criteria failed\n", gate.failures);
    return gate.failures == 0 ? 0 : 1;
}
