#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isaacs/expr.hpp"

namespace isaacs {

// ============================================================================
// Game data: controlled dynamics dX = b dt + sigma dB, recursive payoff
// driver g with time-dependent discount rho, growth envelope
// |g(t,x,0,0,u,v)| <= beta1(t) + beta2, and finite control grids U, V.
// ============================================================================

enum class BoundaryPolicy { LipschitzExtrapolation, OneSidedDifferences };

struct GridSpec {
    std::vector<double> lo;  // per-dimension box
    std::vector<double> hi;
    std::vector<int> points; // per-dimension count (>= 3)
    double window_end = 2.0; // S: the time window [0, S] retained by solves
    double dt = 0.0;         // 0 = derive from the CFL bound
    BoundaryPolicy boundary = BoundaryPolicy::LipschitzExtrapolation;
    double cfl_safety = 0.9;

    int dim() const { return static_cast<int>(points.size()); }
    double step(int i) const { return (hi[i] - lo[i]) / (points[i] - 1); }
    std::size_t num_points() const {
        std::size_t n = 1;
        for (int p : points) n *= static_cast<std::size_t>(p);
        return n;
    }
};

struct SolverOptions {
    double tol = 1e-3;         // truncation stopping tolerance
    double horizon_step = 1.0; // Delta T between truncation horizons
    double horizon_cap = 40.0; // largest horizon attempted
    std::uint64_t seed = 20260801;
    int est_samples = 4000;    // sample pairs for constant estimation
    int mc_paths = 10000;
    double mc_dt = 0.01;
    double quad_window = 50.0; // [0, T_quad] quadrature range for beta1
    double bound_slack = 0.05;     // uniform-bound check multiplier - 1
    double lipschitz_slack = 0.10; // Lipschitz check multiplier - 1
    double rate_slack = 0.20;      // truncation-rate fit margin
    double scheme_slack_factor = 0.02; // scheme slack = factor * M1_inf
};

struct GameProblem {
    int state_dim = 0; // n
    int noise_dim = 0; // d
    std::vector<Expr> drift;     // n entries, b_i(t, x, u, v)
    std::vector<Expr> diffusion; // n*d entries row-major, sigma_ik(t, x, u, v)
    Expr generator;              // g(t, x, y, z, u, v); y receives rho(t) * Y
    Expr discount;               // rho(t)
    Expr beta1;                  // beta1(t) >= 0
    double beta2 = 0.0;
    double beta1_tail_coeff = 0.0; // declared majorant c*exp(-lambda t) past quad_window
    double beta1_tail_rate = 1.0;
    std::vector<std::vector<double>> control_set_u; // finite grids; never empty
    std::vector<std::vector<double>> control_set_v;
    bool autonomous_flag = false; // true iff no expression references t

    int control_dim_u() const { return static_cast<int>(control_set_u.front().size()); }
    int control_dim_v() const { return static_cast<int>(control_set_v.front().size()); }
    VarLayout layout() const {
        return VarLayout{state_dim, noise_dim, control_dim_u(), control_dim_v()};
    }
    const Expr& sigma(int i, int k) const { return diffusion[i * noise_dim + k]; }
    bool control_free() const {
        return control_set_u.size() == 1 && control_set_v.size() == 1;
    }
};

/// A parsed problem file: the game data plus grid and solver settings from
/// the [grid] and [solver] sections.
struct ProblemFile {
    GameProblem problem;
    GridSpec grid;
    SolverOptions solver;
};

/// Parses the line-oriented key/value document described in
/// docs/problem_format.md. Throws ParseError (with byte offset) for lexical
/// problems and ConfigError for semantic ones (missing keys, dimension
/// mismatches, empty control sets).
ProblemFile load_problem(std::string_view text);
ProblemFile load_problem_file(const std::string& path);

/// Applies "section.key=value" overrides to raw document text semantics;
/// unknown keys throw ConfigError.
ProblemFile load_problem(std::string_view text,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

// ============================================================================
// Discount kernel
// ============================================================================

/// Gamma_{t,s} = exp(-int_t^s rho(r) dr), computed by adaptive Simpson
/// quadrature with absolute tolerance 1e-10 on the exponent. Requires
/// 0 <= t <= s. Returns exactly 1 when s == t.
double gamma(const GameProblem& problem, double t, double s);

/// The exponent int_t^s rho(r) dr itself (useful for incremental products).
double discount_integral(const GameProblem& problem, double t, double s);

// ============================================================================
// Assumption validation by sampling
// ============================================================================

struct StateBox {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct AssumptionReport {
    double rho0 = 0.0;    // inf of rho over the time sample
    double L_x = 0.0;     // Lipschitz constants of g, estimated
    double L_y = 0.0;
    double L_z = 0.0;
    double mu = 0.0;      // dissipativity constant of the state flow
    double beta1_L1 = 0.0;
    double beta2 = 0.0;
    double b_sigma_bound = 0.0; // sup |b|, ||sigma||_F over the sample
    bool monotone_in_y_ok = true;
    bool dissipativity_ok = false; // mu > -rho0
    int sample_count = 0;
    StateBox sample_box;
    std::uint64_t seed = 0;
};

/// Estimates the standing-assumption constants by sampling difference
/// quotients over `box`. Always completes; failures are reported through
/// the boolean flags. Deterministic for a fixed seed. `quad_window` is the
/// finite range over which the beta1 integral is computed by quadrature;
/// the declared tail majorant covers the remainder.
AssumptionReport estimate_constants(const GameProblem& problem, const StateBox& box, int samples,
                                    std::uint64_t seed, double quad_window = 50.0);

// ============================================================================
// Closed-form bounds derived from an AssumptionReport
// ============================================================================

struct Bounds {
    double M1_inf = 0.0;
    double M2_inf = 0.0;
    std::optional<double> Lip_W; // absent when dissipativity fails

    double beta1_L1 = 0.0;
    double beta2 = 0.0;
    double rho0 = 0.0;

    /// Uniform bound for a terminal value bounded by xi_bound.
    double M1(double xi_bound) const { return xi_bound + beta1_L1 + beta2 / rho0; }
    /// Same envelope for the decoupled FBSDE with |psi| <= psi_bound.
    double M3(double psi_bound) const { return M1(psi_bound); }
};

/// Direct substitution of the report's constants into the closed-form
/// bound expressions. Pure; bit-exact on recomputation. Requires rho0 > 0.
Bounds value_bounds(const AssumptionReport& report);

} // namespace isaacs
