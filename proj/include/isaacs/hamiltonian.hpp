#pragma once

#include <span>
#include <vector>

#include "isaacs/problem.hpp"

namespace isaacs {

// ============================================================================
// Lower/upper Hamiltonians over finite control grids:
//
//   H_lower(t,x,y,p,A) = sup_u inf_v { 1/2 tr(sigma sigma^T A) + b.p
//                                      + g(t, x, rho(t) y, p sigma, u, v) }
//   H_upper             = same with inf_v sup_u
//
// The z argument passed to g is the contraction z_k = sum_i p_i sigma_ik.
// Enumeration is exhaustive; ties break toward the lowest control index,
// so the selected pair is deterministic.
// ============================================================================

struct HamiltonianInput {
    double t = 0.0;
    std::vector<double> x; // n
    double y = 0.0;        // candidate value W(t,x)
    std::vector<double> p; // gradient, n
    std::vector<double> A; // Hessian, n*n row-major; symmetrized on construction

    HamiltonianInput() = default;
    HamiltonianInput(double t_, std::vector<double> x_, double y_, std::vector<double> p_,
                     std::vector<double> A_);
};

struct MinimaxResult {
    double value = 0.0;
    int u_index = 0;
    int v_index = 0;
};

MinimaxResult lower_hamiltonian(const GameProblem& problem, const HamiltonianInput& in);
MinimaxResult upper_hamiltonian(const GameProblem& problem, const HamiltonianInput& in);

/// upper - lower at the same input; nonnegative by the minimax inequality
/// (exact on finite grids: both orders reduce the same value matrix).
double isaacs_gap(const GameProblem& problem, const HamiltonianInput& in);

/// Discount-transformed Hamiltonian
///   H~(t,x,r,p,A) = Gamma_{0,t} * H_lower(t, x, r/Gamma, p/Gamma, A/Gamma).
double transformed_hamiltonian(const GameProblem& problem, double t,
                               const std::vector<double>& x, double r,
                               const std::vector<double>& p, const std::vector<double>& A);
/// Variant taking a precomputed Gamma_{0,t} (solver hot path).
double transformed_hamiltonian(const GameProblem& problem, const HamiltonianInput& in,
                               double gamma_0t);

// ============================================================================
// Shared evaluation scaffolding (also used by the PDE and MC modules).
// One instance per thread; holds the variable slot buffer.
// ============================================================================

class ProblemEval {
public:
    explicit ProblemEval(const GameProblem& problem);

    const GameProblem& problem() const { return *p_; }

    void set_time(double t) { slots_[0] = t; }
    void set_state(std::span<const double> x);
    void set_control_pair(int u_index, int v_index);

    double rho();
    /// Drift vector at the current (t, x, u, v); out has length n.
    void drift(std::span<double> out);
    /// Diffusion matrix, row-major n*d.
    void sigma(std::span<double> out);
    /// Generator with explicit y (already scaled by rho) and z slots.
    double generator(double y_scaled, std::span<const double> z);

    int num_u() const { return static_cast<int>(p_->control_set_u.size()); }
    int num_v() const { return static_cast<int>(p_->control_set_v.size()); }

private:
    const GameProblem* p_;
    VarLayout layout_;
    std::vector<double> slots_;
};

/// sup_u inf_v of pair_value(ui, vi); lowest-index tie-breaking.
template <class PairFn>
MinimaxResult minimax_sup_inf(int nu, int nv, PairFn&& pair_value) {
    MinimaxResult best{0.0, 0, 0};
    bool first_u = true;
    for (int ui = 0; ui < nu; ++ui) {
        double inner = 0.0;
        int inner_v = 0;
        bool first_v = true;
        for (int vi = 0; vi < nv; ++vi) {
            double val = pair_value(ui, vi);
            if (first_v || val < inner) {
                inner = val;
                inner_v = vi;
                first_v = false;
            }
        }
        if (first_u || inner > best.value) {
            best = {inner, ui, inner_v};
            first_u = false;
        }
    }
    return best;
}

/// inf_v sup_u of pair_value(ui, vi); lowest-index tie-breaking.
template <class PairFn>
MinimaxResult minimax_inf_sup(int nu, int nv, PairFn&& pair_value) {
    MinimaxResult best{0.0, 0, 0};
    bool first_v = true;
    for (int vi = 0; vi < nv; ++vi) {
        double inner = 0.0;
        int inner_u = 0;
        bool first_u = true;
        for (int ui = 0; ui < nu; ++ui) {
            double val = pair_value(ui, vi);
            if (first_u || val > inner) {
                inner = val;
                inner_u = ui;
                first_u = false;
            }
        }
        if (first_v || inner < best.value) {
            best = {inner, inner_u, vi};
            first_v = false;
        }
    }
    return best;
}

} // namespace isaacs
