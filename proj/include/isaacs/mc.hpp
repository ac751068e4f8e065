#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isaacs/problem.hpp"
#include "isaacs/solver.hpp"

namespace isaacs {

// ============================================================================
// Probabilistic side: Euler-Maruyama simulation of the controlled state and
// least-squares Monte-Carlo solution of the associated truncated BSDE
//
//   Y_j = E[Y_{j+1} | X_j] + dt (g(t_j, X_j, rho Y, Z_j, u, v) - rho Y),
//
// for frozen control policies, with zero or psi(X) terminal data and
// optional box-exit stopping. This is the independent oracle for the PDE
// solver on the subproblems where both are defined.
// ============================================================================

struct ControlPolicy {
    enum class Mode { ConstantPair, FeedbackTable };
    Mode mode = Mode::ConstantPair;
    int u_index = 0;
    int v_index = 0;
    const ValueField* table = nullptr; // feedback mode; must outlive the policy

    static ControlPolicy constant_pair(int u_index, int v_index);
    /// Reads the saddle selections recorded by a solve with record_policy.
    /// Lookups clamp to the nearest stored layer and grid cell.
    static ControlPolicy feedback(const ValueField& field);

    std::pair<int, int> at(double t, const std::vector<double>& x) const;
};

struct PathBundle {
    int state_dim = 0;
    int noise_dim = 0;
    double t0 = 0.0;
    double dt = 0.0;
    int steps = 0;     // mesh t_j = t0 + j dt, j = 0..steps
    int num_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> x0;
    std::vector<double> states;          // path-major: p * (steps+1) * n
    std::vector<double> increments;      // path-major: p * steps * d
    std::vector<int> stop_index;         // first index outside the box, or steps
    std::vector<std::uint8_t> stop_kind; // 0 = horizon, 1 = exit
    bool has_exit_box = false;
    StateBox exit_box;

    const double* state(int p, int j) const {
        return states.data() +
               (static_cast<std::size_t>(p) * (steps + 1) + static_cast<std::size_t>(j)) *
                   state_dim;
    }
    const double* increment(int p, int j) const {
        return increments.data() +
               (static_cast<std::size_t>(p) * steps + static_cast<std::size_t>(j)) * noise_dim;
    }
    double t_of(int j) const { return t0 + dt * j; }
};

/// Euler-Maruyama forward simulation with per-path counter-based noise
/// streams derived from (seed, path); results do not depend on thread
/// scheduling. Stops a path at the first mesh point outside exit_box (the
/// state is kept frozen afterwards). x0 must lie inside the box.
PathBundle simulate_paths(const GameProblem& problem, const ControlPolicy& policy, double t0,
                          const std::vector<double>& x0, double dt, double T_max, int num_paths,
                          std::uint64_t seed,
                          const std::optional<StateBox>& exit_box = std::nullopt);

struct BsdeEstimate {
    double y0 = 0.0;
    double se = 0.0;         // standard error of the terminal-layer average
    std::vector<double> z0;  // Z at the initial layer
    double t0 = 0.0;
    double horizon = 0.0;
    std::string terminal_desc;   // "zero" or the psi source text
    double terminal_abs_max = 0.0; // max |terminal value| observed
    int paths = 0;
    std::vector<std::vector<double>> cont_coeffs; // per-layer regression coefficients
    std::vector<double> layer_max_abs_y;          // per-layer sup |Y| over live paths
    std::vector<double> layer_mean_z_norm;        // per-layer mean |Z|
};

/// Backward least-squares Monte-Carlo pass over the bundle up to horizon T
/// (T must lie on the bundle mesh, T <= T_max). Exited paths carry
/// psi(X_tau) (zero when terminal_psi is null); survivors carry zero when
/// an exit box is present (truncation), else psi(X_T). The implicit Y step
/// is resolved by two fixed-point iterations; dt rho_max (1 + L_y) < 1 is
/// enforced. Regression basis: monomials of total degree <= 2.
BsdeEstimate solve_bsde_truncated(const PathBundle& bundle, const GameProblem& problem,
                                  const ControlPolicy& policy, double T,
                                  const Expr* terminal_psi = nullptr);

struct McRunOptions {
    double dt = 0.01;
    int paths = 10000;
    std::uint64_t seed = 1;
    double T0 = 1.0;          // first truncation horizon
    double horizon_step = 1.0;
    double horizon_cap = 40.0;
    double rho0 = 0.0;        // required (a posteriori tail bound)
};

struct InfiniteBsdeResult {
    BsdeEstimate estimate;        // at the final horizon
    std::vector<double> horizons; // T_0, T_1, ...
    std::vector<double> y0s;      // per-horizon Y_0
    std::vector<double> deltas;   // |Y_0^{T_{k+1}} - Y_0^{T_k}|
    double tail_bound = 0.0;
    bool converged = false;
};

/// Zero-terminal truncation at growing horizons until consecutive Y_0
/// estimates differ by at most tol. The factory must produce bundles that
/// share noise for overlapping steps (simulate_paths with a fixed seed
/// does, by counter-based construction).
InfiniteBsdeResult estimate_infinite(const std::function<PathBundle(double)>& bundle_factory,
                                     const GameProblem& problem, const ControlPolicy& policy,
                                     double tol, const McRunOptions& options);

/// Convenience overload with the default simulate_paths factory.
InfiniteBsdeResult estimate_infinite(const GameProblem& problem, const ControlPolicy& policy,
                                     double t0, const std::vector<double>& x0, double tol,
                                     const McRunOptions& options);

} // namespace isaacs
