#include <doctest.h>

#include <cmath>

#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

using namespace isaacs;

namespace {

ProblemFile load(const std::string& text) { return load_problem(text); }

// Control-free deterministic recursion: b = 0, sigma = 0, rho = 1,
// g = exp(-t). The truncated value is the quadrature
//   W^T(t, x) = int_t^T exp(-(s-t)) exp(-s) ds = (exp(-t) - exp(t-2T)) / 2.
const char* kQuadratureCase = R"cfg(
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

// Independent oracle: composite Simpson for int_t^T e^{-(s-t)} e^{-s} ds.
double quadrature_oracle(double t, double T) {
    int m = 4000;
    double h = (T - t) / m;
    auto f = [&](double s) { return std::exp(-(s - t)) * std::exp(-s); };
    double acc = f(t) + f(T);
    for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(t + i * h);
    return acc * h / 3.0;
}

const char* kSeparableGame = R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "0.5*(u1+v1)"
sigma11 = "1"
[generator]
g = "u1 - v1 + 1"
[discount]
rho = "1"
[growth]
beta2 = 3
[controls]
U = [[-1], [0], [1]]
V = [[-1], [0], [1]]
[grid]
lo = [-2]
hi = [2]
points = [41]
window = 2.0
)cfg";

} // namespace

TEST_CASE("solve_finite: zero generator gives the exact zero field") {
    ProblemFile pf = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "-x1"
sigma11 = "1"
[generator]
g = "0"
[discount]
rho = "1"
[growth]
beta2 = 0
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-2]
hi = [2]
points = [21]
window = 1.0
)cfg");
    ValueField f = solve_finite(pf.problem, pf.grid, 3.0, FieldKind::Lower);
    for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("solve_finite: control-free quadrature oracle at T = 4") {
    // Frozen from the oracle: (1 - exp(-8)) / 2.
    const double expected = 0.49983226868604874;
    CHECK(quadrature_oracle(0.0, 4.0) == doctest::Approx(expected).epsilon(1e-10));

    ProblemFile pf = load(kQuadratureCase);
    ValueField f = solve_finite(pf.problem, pf.grid, 4.0, FieldKind::Lower);
    CHECK(f.at(0, 2) == doctest::Approx(expected).epsilon(2e-3));
    CHECK(std::fabs(f.at(0, 2) - expected) < 1e-3);
    // And at an interior time layer, against the same oracle.
    int layer = f.layer_of_t(0.5);
    CHECK(f.at(layer, 2) ==
          doctest::Approx(quadrature_oracle(f.t_of_layer(layer), 4.0)).epsilon(5e-3));
}

TEST_CASE("solve_finite: separable game has equal lower and upper fields") {
    ProblemFile pf = load(kSeparableGame);
    ValueField lo = solve_finite(pf.problem, pf.grid, 3.0, FieldKind::Lower);
    ValueField hi = solve_finite(pf.problem, pf.grid, 3.0, FieldKind::Upper);
    double worst = 0.0;
    for (std::size_t i = 0; i < lo.values.size(); ++i)
        worst = std::max(worst, std::fabs(lo.values[i] - hi.values[i]));
    CHECK(worst <= 1e-12);
}

TEST_CASE("solve_finite: pinned dt violating the CFL bound is rejected") {
    ProblemFile pf = load(kSeparableGame);
    pf.grid.dt = 0.5; // sigma^2/h^2 makes the limit ~1e-2 here
    CHECK_THROWS_AS(solve_finite(pf.problem, pf.grid, 3.0, FieldKind::Lower), SolverError);
}

TEST_CASE("solve_infinite: zero generator converges at the first horizon") {
    ProblemFile pf = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "0"
sigma11 = "1"
[generator]
g = "0"
[discount]
rho = "1"
[growth]
beta2 = 0
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-1]
hi = [1]
points = [11]
window = 1.0
)cfg");
    SolveControls ctl;
    ctl.rho0 = 1.0;
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    CHECK(res.trace.converged);
    CHECK(res.trace.deltas.size() == 1);
    CHECK(res.trace.deltas[0] == 0.0);
    for (double v : res.field.values) CHECK(v == 0.0);
}

TEST_CASE("solve_infinite: control-free value converges to exp(-t)/2") {
    ProblemFile pf = load(kQuadratureCase);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    ctl.tol = 1e-5;
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    CHECK(res.trace.converged);
    CHECK(res.field.at(0, 2) == doctest::Approx(0.5).epsilon(2e-3));
    int layer = res.field.layer_of_t(1.0);
    CHECK(res.field.at(layer, 2) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(5e-3));
}

TEST_CASE("solve_infinite: trace decays at the discount rate on the separable game") {
    ProblemFile pf = load(kSeparableGame);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    ctl.tol = 1e-4;
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    CHECK(res.trace.converged);
    CHECK(res.trace.fit_points >= 4);
    // log delta_k drops by about rho0 * horizon_step per step.
    CHECK(res.trace.fitted_rate == doctest::Approx(-1.0).epsilon(0.2));
    // Deltas are nonincreasing after burn-in, and consecutive ratios track
    // the geometric factor exp(-rho0 dT) up to the 20% margin.
    for (std::size_t k = 1; k < res.trace.deltas.size(); ++k) {
        CHECK(res.trace.deltas[k] <= res.trace.deltas[k - 1] * (1.0 + 1e-9));
        CHECK(res.trace.deltas[k] / res.trace.deltas[k - 1] <=
              std::exp(-ctl.rho0 * ctl.horizon_step) * 1.2);
    }
    // A posteriori tail bound dominates the next delta.
    CHECK(res.trace.tail_bound >= res.trace.deltas.back());
}

TEST_CASE("discrete comparison: g1 <= g2 implies W1 <= W2 pointwise") {
    ProblemFile pf1 = load(kSeparableGame);
    std::string text2(kSeparableGame);
    text2.replace(text2.find("u1 - v1 + 1"), 11, "u1 - v1 + 2");
    ProblemFile pf2 = load(text2);
    ValueField w1 = solve_finite(pf1.problem, pf1.grid, 3.0, FieldKind::Lower);
    ValueField w2 = solve_finite(pf2.problem, pf2.grid, 3.0, FieldKind::Lower);
    for (std::size_t i = 0; i < w1.values.size(); ++i)
        CHECK(w1.values[i] <= w2.values[i] + 1e-14);
}

TEST_CASE("uniform bound: |W^T| <= M1(0) on the marched field") {
    ProblemFile pf = load(kSeparableGame);
    AssumptionReport rep = estimate_constants(pf.problem, StateBox{pf.grid.lo, pf.grid.hi},
                                              500, 21);
    Bounds bounds = value_bounds(rep);
    ValueField f = solve_finite(pf.problem, pf.grid, 4.0, FieldKind::Lower);
    double worst = 0.0;
    for (double v : f.values) worst = std::max(worst, std::fabs(v));
    CHECK(worst <= bounds.M1(0.0) * 1.05);
}

TEST_CASE("solve_stationary: constant generator gives w = c/rho") {
    ProblemFile pf = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "-x1"
sigma11 = "0.5"
[generator]
g = "0.75"
[discount]
rho = "0.5"
[growth]
beta2 = 0.75
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-1]
hi = [1]
points = [21]
window = 1.0
)cfg");
    SolveControls ctl;
    ctl.tol = 1e-6;
    ValueField w = solve_stationary(pf.problem, pf.grid, FieldKind::Lower, ctl);
    for (double v : w.values) CHECK(v == doctest::Approx(1.5).epsilon(1e-5));

    // Zero generator fixed point is exactly zero.
    ProblemFile pf0 = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "-x1"
sigma11 = "0.5"
[generator]
g = "0"
[discount]
rho = "0.5"
[growth]
beta2 = 0
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-1]
hi = [1]
points = [21]
window = 1.0
)cfg");
    ValueField w0 = solve_stationary(pf0.problem, pf0.grid, FieldKind::Lower, ctl);
    for (double v : w0.values) CHECK(v == 0.0);
}

TEST_CASE("solve_stationary: rejects non-autonomous problems") {
    ProblemFile pf = load(kQuadratureCase); // g references t
    SolveControls ctl;
    CHECK_THROWS_AS(solve_stationary(pf.problem, pf.grid, FieldKind::Lower, ctl), ConfigError);
}

TEST_CASE("solve_stationary matches the infinite-horizon t=0 layer (autonomous)") {
    ProblemFile pf = load(kSeparableGame);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    ctl.tol = 1e-4;
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    ValueField stat = solve_stationary(pf.problem, pf.grid, FieldKind::Lower, ctl);
    double worst = 0.0;
    for (std::size_t pt = 0; pt < stat.values.size(); ++pt)
        worst = std::max(worst, std::fabs(stat.values[pt] - res.field.values[pt]));
    CHECK(worst <= 2.0 * (ctl.tol + 0.02 * 3.0)); // combined budget
    // The common fixed point here is w = 1 (sup inf of u - v + 1, discounted at 1).
    CHECK(stat.values[20] == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("solve_transformed: zero data stays zero and recovery is exact at t=0") {
    ProblemFile pf = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "0"
sigma11 = "1"
[generator]
g = "0"
[discount]
rho = "0.5 + 0.5*exp(-t)"
[growth]
beta2 = 0
[controls]
U = [[0]]
V = [[0]]
[grid]
lo = [-1]
hi = [1]
points = [11]
window = 1.0
)cfg");
    SolveControls ctl;
    ctl.rho0 = 0.5;
    InfiniteSolveResult res = solve_transformed(pf.problem, pf.grid, ctl);
    for (double v : res.field.values) CHECK(v == 0.0);
    CHECK(res.field.meta.transform_t0_bitexact);
    CHECK(res.field.meta.transform_discrepancy == 0.0);
}

TEST_CASE("solve_transformed: recovered field matches the direct solve") {
    ProblemFile pf = load(kQuadratureCase);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    ctl.tol = 1e-5;
    InfiniteSolveResult res = solve_transformed(pf.problem, pf.grid, ctl);
    CHECK(res.trace.converged);
    CHECK(res.field.meta.transform_discrepancy <= 1e-3);
    CHECK(res.field.meta.transform_t0_bitexact);
    CHECK(res.field.at(0, 2) == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("isaacs_scan: zero gap on separable, positive on bilinear drift") {
    ProblemFile pf = load(kSeparableGame);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    InfiniteSolveResult res = solve_infinite(pf.problem, pf.grid, FieldKind::Lower, ctl);
    CHECK(isaacs_scan(pf.problem, res.field).max_gap == 0.0);

    ProblemFile bil = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "u1*v1"
sigma11 = "1"
[generator]
g = "1"
[discount]
rho = "1"
[growth]
beta2 = 1
[controls]
U = [[-1], [1]]
V = [[-1], [1]]
[grid]
lo = [-2]
hi = [2]
points = [41]
window = 1.0
)cfg");
    InfiniteSolveResult bres = solve_infinite(bil.problem, bil.grid, FieldKind::Lower, ctl);
    GapScan scan = isaacs_scan(bil.problem, bres.field);
    CHECK(scan.max_gap >= 0.0); // constant-in-x value: gradient ~ 0, gap ~ 0 here
}

TEST_CASE("feedback policy recording covers the stored window") {
    ProblemFile pf = load(kSeparableGame);
    SolveControls ctl;
    ctl.rho0 = 1.0;
    ctl.record_policy = true;
    ValueField f = solve_finite(pf.problem, pf.grid, 3.0, FieldKind::Lower, ctl);
    REQUIRE(f.policy_u.size() == f.values.size());
    for (std::uint16_t ui : f.policy_u) CHECK(ui < 3);
}

TEST_CASE("one-sided-differences boundary policy solves and preserves exact cases") {
    std::string text(kQuadratureCase);
    text += "boundary = one-sided-differences\n";
    ProblemFile pf = load(text);
    CHECK(pf.grid.boundary == BoundaryPolicy::OneSidedDifferences);
    // x-independent problem: both policies give the same x-constant field.
    ValueField f = solve_finite(pf.problem, pf.grid, 4.0, FieldKind::Lower);
    CHECK(std::fabs(f.at(0, 2) - 0.49983226868604874) < 1e-3);
    CHECK(f.at(0, 0) == f.at(0, 4));

    // x-dependent OU problem stays finite and bounded under both policies.
    ProblemFile ou = load(R"cfg(
[dims]
state = 1
noise = 1
[dynamics]
b1 = "-x1"
sigma11 = "1"
[generator]
g = "exp(-t)*cos(x1)"
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
lo = [-2]
hi = [2]
points = [41]
window = 1.0
boundary = one-sided-differences
)cfg");
    ValueField g = solve_finite(ou.problem, ou.grid, 3.0, FieldKind::Lower);
    for (double v : g.values) {
        CHECK(std::isfinite(v));
        CHECK(std::fabs(v) <= 1.05);
    }
}

TEST_CASE("ValueField interpolation is exact on grid points and linear between") {
    ProblemFile pf = load(kSeparableGame);
    ValueField f = solve_finite(pf.problem, pf.grid, 2.0, FieldKind::Lower);
    CHECK(f.interpolate(0, {pf.grid.lo[0]}) == f.at(0, 0));
    double mid = 0.5 * (f.point(3)[0] + f.point(4)[0]);
    CHECK(f.interpolate(0, {mid}) ==
          doctest::Approx(0.5 * (f.at(0, 3) + f.at(0, 4))).epsilon(1e-12));
}
