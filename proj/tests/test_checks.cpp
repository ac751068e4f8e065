#include <doctest.h>

#include <cmath>

#include "isaacs/checks.hpp"

using namespace isaacs;

namespace {

TruncationTrace synthetic_trace(double rate, int points) {
    TruncationTrace tr;
    for (int k = 0; k <= points; ++k) tr.horizons.push_back(2.0 + k);
    for (int k = 0; k < points; ++k) tr.deltas.push_back(std::exp(rate * (k + 1)));
    // Mirror the solver's fit.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < points; ++k) {
        double x = tr.horizons[static_cast<std::size_t>(k)];
        double y = std::log(tr.deltas[static_cast<std::size_t>(k)]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    tr.fitted_rate = (points * sxy - sx * sy) / (points * sxx - sx * sx);
    tr.fit_points = points;
    tr.converged = true;
    return tr;
}

ValueField constant_field(int points, int layers, double value) {
    ValueField f;
    f.grid.lo = {-1.0};
    f.grid.hi = {1.0};
    f.grid.points = {points};
    f.kind = FieldKind::Lower;
    f.layers = layers;
    f.meta.dt = 0.5;
    f.values.assign(static_cast<std::size_t>(points) * layers, value);
    return f;
}

} // namespace

TEST_CASE("check_truncation_rate: synthetic geometric traces") {
    // delta_k = e^{-k} against rho0 = 1: slope -1 <= -0.8, pass.
    CheckReport pass = check_truncation_rate(synthetic_trace(-1.0, 6), 1.0);
    CHECK(pass.pass);
    CHECK(pass.measured == doctest::Approx(-1.0).epsilon(1e-9));

    // delta_k = e^{-k/2} against rho0 = 1: slope -0.5 > -0.8, fail.
    CheckReport fail = check_truncation_rate(synthetic_trace(-0.5, 6), 1.0);
    CHECK_FALSE(fail.pass);

    // Too few usable points is a precondition error.
    CHECK_THROWS_AS(check_truncation_rate(synthetic_trace(-1.0, 3), 1.0), ConfigError);
}

TEST_CASE("check_bounds: interior sup against M1_inf") {
    Bounds b;
    b.M1_inf = 1.0;
    b.rho0 = 1.0;
    CheckReport zero = check_bounds(constant_field(21, 3, 0.0), b);
    CHECK(zero.pass);
    CHECK(zero.measured == 0.0);

    CheckReport ok = check_bounds(constant_field(21, 3, 0.9), b);
    CHECK(ok.pass);

    // Constructed violation: field at twice the bound.
    CheckReport bad = check_bounds(constant_field(21, 3, 2.0), b);
    CHECK_FALSE(bad.pass);
    CHECK(bad.measured == 2.0);
}

TEST_CASE("check_lipschitz: slopes and the skipped branch") {
    Bounds b;
    b.M1_inf = 1.0;
    b.rho0 = 1.0;
    b.Lip_W = 0.5;
    CheckReport flat = check_lipschitz(constant_field(21, 2, 0.7), b);
    CHECK(flat.pass);
    CHECK(flat.measured == 0.0);

    // Steep synthetic field: W = 2x has slope 2 > 0.55.
    ValueField steep = constant_field(21, 1, 0.0);
    for (int i = 0; i < 21; ++i)
        steep.values[static_cast<std::size_t>(i)] = 2.0 * (-1.0 + 0.1 * i);
    CheckReport bad = check_lipschitz(steep, b);
    CHECK_FALSE(bad.pass);
    CHECK(bad.measured == doctest::Approx(2.0).epsilon(1e-9));

    b.Lip_W.reset();
    CheckReport skipped = check_lipschitz(steep, b);
    CHECK(skipped.skipped);
    CHECK(skipped.pass);
}

TEST_CASE("check_boundary_decay: branch selection on beta2") {
    GameProblem p = load_problem(R"cfg(
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
)cfg").problem;
    AssumptionReport rep;
    rep.rho0 = 1.0;
    rep.beta2 = 0.0;
    Bounds b;
    b.M1_inf = 1.0;
    b.rho0 = 1.0;

    // Field mimicking W(t,x) = exp(-t)/2 on [0, 4].
    ValueField f = constant_field(11, 9, 0.0);
    f.meta.dt = 0.5;
    for (int layer = 0; layer < 9; ++layer)
        for (int i = 0; i < 11; ++i)
            f.values[static_cast<std::size_t>(layer) * 11 + i] = 0.5 * std::exp(-0.5 * layer);
    auto reports = check_boundary_decay(p, f, b, rep, 0.02);
    REQUIRE(reports.size() == 2); // beta2 = 0 adds the undiscounted check
    CHECK(reports[0].pass);
    CHECK(reports[1].pass);

    rep.beta2 = 0.5;
    auto only_gamma = check_boundary_decay(p, f, b, rep, 0.02);
    CHECK(only_gamma.size() == 1);

    // Constructed violation of the undiscounted bound: W stuck at 0.9.
    rep.beta2 = 0.0;
    ValueField stuck = constant_field(11, 9, 0.9);
    stuck.meta.dt = 0.5;
    auto bad = check_boundary_decay(p, stuck, b, rep, 0.02);
    REQUIRE(bad.size() == 2);
    CHECK_FALSE(bad[1].pass); // 0.9 > int_4^inf beta1 + slack at late t
}

TEST_CASE("check_stationarity: constant fields pass, drifting layers fail") {
    ValueField f = constant_field(11, 5, 1.5);
    ValueField w = constant_field(11, 1, 1.5);
    auto ok = check_stationarity(f, w, 1e-3, 0.02);
    REQUIRE(ok.size() == 2);
    CHECK(ok[0].pass);
    CHECK(ok[1].pass);

    ValueField drift = f;
    for (int i = 0; i < 11; ++i) drift.values[4 * 11 + i] = 2.5; // last layer off by 1
    auto bad = check_stationarity(drift, w, 1e-3, 0.02);
    CHECK_FALSE(bad[0].pass);
    CHECK(bad[1].pass);
}

TEST_CASE("check_isaacs_value: equality gate vs informational gap") {
    ValueField lo = constant_field(11, 2, 0.3);
    ValueField hi = constant_field(11, 2, 0.3);
    GapScan zero{0.0, 0.0, {0.0}};
    CheckReport eq = check_isaacs_value(lo, hi, zero, 0.01);
    CHECK(eq.pass);
    CHECK_FALSE(eq.informational);

    hi.values[5] = 0.5;
    CheckReport neq = check_isaacs_value(lo, hi, zero, 0.01);
    CHECK_FALSE(neq.pass); // gap zero but fields differ by 0.2 > 0.02

    GapScan wide{2.0, 0.0, {0.0}};
    CheckReport info = check_isaacs_value(lo, hi, wide, 0.01);
    CHECK(info.pass);
    CHECK(info.informational);
}

TEST_CASE("cross_validate: budget combines SE and scheme slack") {
    ValueField f = constant_field(11, 2, 0.5);
    BsdeEstimate mc;
    mc.y0 = 0.505;
    mc.se = 0.001;
    mc.t0 = 0.0;
    CheckReport ok = cross_validate(f, mc, {0.0}, 0.01);
    CHECK(ok.pass); // |0.5 - 0.505| <= 0.003 + 0.01

    mc.y0 = 0.6;
    CheckReport bad = cross_validate(f, mc, {0.0}, 0.01);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("all_passed ignores informational and skipped entries") {
    CheckReport fail_info;
    fail_info.informational = true;
    fail_info.pass = false;
    CheckReport skip;
    skip.skipped = true;
    skip.pass = false;
    CheckReport ok;
    ok.pass = true;
    CHECK(all_passed({fail_info, skip, ok}));
    CheckReport hard_fail;
    hard_fail.pass = false;
    CHECK_FALSE(all_passed({ok, hard_fail}));
}
