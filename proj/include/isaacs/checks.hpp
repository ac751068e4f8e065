#pragma once

#include <string>
#include <vector>

#include "isaacs/mc.hpp"
#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

namespace isaacs {

// ============================================================================
// Quantitative inequality suite run against solver outputs. Every check
// reports the measured quantity, the bound, and the slack that was applied;
// pass == (measured <= bound + slack). A failed precondition (e.g. no
// Lipschitz bound without dissipativity) yields skipped == true.
// ============================================================================

struct CheckReport {
    std::string name;
    std::string inequality; // the bound being certified, human-readable
    double measured = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool pass = false;
    bool informational = false; // reported, not gating
    bool skipped = false;
    std::string detail;
    std::vector<std::string> artifacts;
};

/// Least-squares fit of log delta_k vs T_k must have slope <= -rho0 (1 - rate_slack).
/// Requires at least 4 trace points above the noise floor.
CheckReport check_truncation_rate(const TruncationTrace& trace, double rho0,
                                  double rate_slack = 0.2);

/// max |W| over the interior (10% boundary margin per side excluded, all
/// stored layers) <= M1_inf (1 + bound_slack).
CheckReport check_bounds(const ValueField& field, const Bounds& bounds,
                         double bound_slack = 0.05, double margin_fraction = 0.1);

/// Max adjacent-point slope of the t=0 layer <= Lip_W (1 + lipschitz_slack).
/// Skipped when the dissipativity bound is unavailable.
CheckReport check_lipschitz(const ValueField& field, const Bounds& bounds,
                            double lipschitz_slack = 0.1);

/// Two decay certificates against the field's time window:
///  - Gamma_{0,t} sup_x |W(t,.)| <= exp(-rho0 t) M1_inf + slack at sampled t;
///  - when beta2 == 0, additionally sup_x |W(t,.)| <= int_t^inf beta1 + slack.
std::vector<CheckReport> check_boundary_decay(const GameProblem& problem,
                                              const ValueField& field, const Bounds& bounds,
                                              const AssumptionReport& report,
                                              double scheme_slack, double quad_window = 50.0);

/// Autonomous case: time layers agree with the t=0 layer within
/// 2 (tol + scheme slack), and the stationary solve matches the t=0 layer
/// within the combined budget.
std::vector<CheckReport> check_stationarity(const ValueField& field,
                                            const ValueField& stationary_field, double tol,
                                            double scheme_slack);

/// If the scanned Isaacs gap vanishes (<= 1e-10), the lower and upper
/// fields must agree within 2x scheme slack; otherwise the gap is reported
/// informationally.
CheckReport check_isaacs_value(const ValueField& lower, const ValueField& upper,
                               const GapScan& gap_scan, double scheme_slack);

/// |W(t0, x0) - Y_0^MC| <= 3 SE + scheme slack (singleton control sets).
CheckReport cross_validate(const ValueField& field, const BsdeEstimate& mc,
                           const std::vector<double>& x0, double scheme_slack);

/// True iff every non-informational, non-skipped check passed.
bool all_passed(const std::vector<CheckReport>& reports);

} // namespace isaacs
