#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isaacs/problem.hpp"

namespace isaacs {

// ============================================================================
// Explicit monotone upwind finite-difference solver for the terminal-value
// HJBI problem
//
//   dW/dt - rho(t) W + H(t, x, W, DW, D^2W) = 0,   W(T, .) = 0,
//
// marched backward from T with per-control upwinding, plus the horizon
// continuation loop that drives T to infinity under the exponential Cauchy
// criterion, the stationary value iteration for autonomous problems, and
// the discount-transformed variant (no zero-order term, terminal data in
// the Gamma-weighted scale).
// ============================================================================

enum class FieldKind { Lower, Upper, Stationary, Transformed };

const char* field_kind_name(FieldKind kind);

struct FieldMeta {
    double dt = 0.0;
    std::vector<double> h;
    double window_end = 0.0; // S after snapping to the time mesh
    double horizon = 0.0;    // T of the final finite solve (0 for stationary)
    bool infinite = false;   // produced by the horizon continuation loop
    std::string minimax;     // "sup-inf" or "inf-sup"
    double cfl_limit = 0.0;  // stability bound on dt at the resolved coefficients
    double tail_bound = 0.0; // a posteriori truncation bound (infinite solves)
    // Transformed solves only:
    double transform_discrepancy = 0.0; // max |recovered - direct| over the window
    bool transform_t0_bitexact = false; // recovery at t=0 is the identity
};

struct ValueField {
    GridSpec grid;
    FieldKind kind = FieldKind::Lower;
    FieldMeta meta;
    int layers = 0;             // stored time layers over [0, window_end]
    std::vector<double> values; // layers * num_points, layer-major
    std::vector<std::uint16_t> policy_u; // optional saddle selections
    std::vector<std::uint16_t> policy_v;

    std::size_t num_points() const { return grid.num_points(); }
    double at(int layer, std::size_t pt) const {
        return values[static_cast<std::size_t>(layer) * num_points() + pt];
    }
    double t_of_layer(int layer) const { return meta.dt * layer; }
    /// Nearest stored layer for time t (clamped).
    int layer_of_t(double t) const;
    /// Multilinear interpolation in space at a stored layer.
    double interpolate(int layer, const std::vector<double>& x) const;
    /// Coordinates of a flattened point index.
    std::vector<double> point(std::size_t pt) const;
};

struct TruncationTrace {
    std::vector<double> horizons; // T_0, T_1, ...
    std::vector<double> deltas;   // deltas[k] = sup |W^{T_k} - W^{T_{k+1}}|
    double fitted_rate = 0.0;     // least-squares slope of log delta vs horizon
    double fit_residual = 0.0;    // RMS residual of the fit
    int fit_points = 0;           // points above the noise floor used in the fit
    double tail_bound = 0.0;      // delta_last / (1 - exp(-rho0 dT))
    bool converged = false;
    double rho0 = 0.0;
    double horizon_step = 0.0;
};

struct SolveControls {
    double tol = 1e-3;
    double horizon_step = 1.0;
    double horizon_cap = 40.0;
    double rho0 = 0.0; // from the assumption report; required by solve_infinite
    double L_y = 0.0;  // y-Lipschitz constant of g entering the CFL bound
    bool record_policy = false;
};

struct InfiniteSolveResult {
    ValueField field;
    TruncationTrace trace;
};

/// One backward march from W(T,.) = 0, keeping the layers in [0, S].
/// kind selects the sup-inf or inf-sup Hamiltonian. Throws SolverError on
/// CFL violation or a non-finite value (with its location).
ValueField solve_finite(const GameProblem& problem, const GridSpec& grid, double T,
                        FieldKind kind, const SolveControls& controls = {});

/// Horizon continuation: T_k = S + k * horizon_step until the sup distance
/// between consecutive solutions on [0, S] drops below tol. The trace
/// records every (T_k, delta_k); `converged` is false if the cap was hit
/// first (the achieved delta is still reported).
InfiniteSolveResult solve_infinite(const GameProblem& problem, const GridSpec& grid,
                                   FieldKind kind, const SolveControls& controls);

/// Stationary value iteration for autonomous problems (constant rho):
/// fixed point of w <- w + dt (H(x, w, Dw, D2w) - rho w). kind must be
/// Lower or Upper; the result has kind Stationary and a single layer.
ValueField solve_stationary(const GameProblem& problem, const GridSpec& grid, FieldKind kind,
                            const SolveControls& controls);

/// Horizon continuation on the discount-transformed equation
/// (d/dt) Wt + Gamma_{0,t} H(t, x, Wt/Gamma, DWt/Gamma, D2Wt/Gamma) = 0,
/// post-divided by Gamma_{0,t} to recover W. Also runs the direct solve and
/// records the max pointwise discrepancy in the metadata.
InfiniteSolveResult solve_transformed(const GameProblem& problem, const GridSpec& grid,
                                      const SolveControls& controls);

/// Largest stable time step for the explicit scheme at the given data
/// (the reciprocal of the sampled CFL denominator).
double cfl_time_step_limit(const GameProblem& problem, const GridSpec& grid, double t_max,
                           double L_y);

/// Max Isaacs gap over the field's grid sample, using the field's own
/// numerical (W, DW, D2W) as Hamiltonian inputs.
struct GapScan {
    double max_gap = 0.0;
    double t = 0.0;
    std::vector<double> x;
};
GapScan isaacs_scan(const GameProblem& problem, const ValueField& field, int layer_stride = 4);

} // namespace isaacs
