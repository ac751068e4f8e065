#include "isaacs/hamiltonian.hpp"

#include <cmath>
#include <cstdio>

namespace isaacs {

HamiltonianInput::HamiltonianInput(double t_, std::vector<double> x_, double y_,
                                   std::vector<double> p_, std::vector<double> A_)
    : t(t_), x(std::move(x_)), y(y_), p(std::move(p_)), A(std::move(A_)) {
    std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.5 * (A[i * n + j] + A[j * n + i]);
            A[i * n + j] = s;
            A[j * n + i] = s;
        }
}

ProblemEval::ProblemEval(const GameProblem& problem)
    : p_(&problem), layout_(problem.layout()),
      slots_(static_cast<std::size_t>(layout_.total()), 0.0) {}

void ProblemEval::set_state(std::span<const double> x) {
    for (int i = 0; i < layout_.n; ++i) slots_[static_cast<std::size_t>(1 + i)] = x[static_cast<std::size_t>(i)];
}

void ProblemEval::set_control_pair(int u_index, int v_index) {
    const auto& u = p_->control_set_u[static_cast<std::size_t>(u_index)];
    const auto& v = p_->control_set_v[static_cast<std::size_t>(v_index)];
    int base_u = 2 + layout_.n + layout_.d;
    for (int j = 0; j < layout_.cu; ++j)
        slots_[static_cast<std::size_t>(base_u + j)] = u[static_cast<std::size_t>(j)];
    int base_v = base_u + layout_.cu;
    for (int j = 0; j < layout_.cv; ++j)
        slots_[static_cast<std::size_t>(base_v + j)] = v[static_cast<std::size_t>(j)];
}

double ProblemEval::rho() { return p_->discount.eval(layout_, slots_); }

void ProblemEval::drift(std::span<double> out) {
    for (int i = 0; i < layout_.n; ++i)
        out[static_cast<std::size_t>(i)] = p_->drift[static_cast<std::size_t>(i)].eval(layout_, slots_);
}

void ProblemEval::sigma(std::span<double> out) {
    int nd = layout_.n * layout_.d;
    for (int i = 0; i < nd; ++i)
        out[static_cast<std::size_t>(i)] = p_->diffusion[static_cast<std::size_t>(i)].eval(layout_, slots_);
}

double ProblemEval::generator(double y_scaled, std::span<const double> z) {
    slots_[static_cast<std::size_t>(1 + layout_.n)] = y_scaled;
    for (int k = 0; k < layout_.d; ++k)
        slots_[static_cast<std::size_t>(2 + layout_.n + k)] = z[static_cast<std::size_t>(k)];
    return p_->generator.eval(layout_, slots_);
}

namespace {

[[noreturn]] void rethrow_with_context(const EvalError& e, const HamiltonianInput& in, int ui,
                                       int vi) {
    char buf[160];
    std::string xs;
    for (double xi : in.x) {
        char num[32];
        std::snprintf(num, sizeof(num), "%s%.6g", xs.empty() ? "" : ",", xi);
        xs += num;
    }
    std::snprintf(buf, sizeof(buf), " [t=%.6g x=(%s) u#%d v#%d]", in.t, xs.c_str(), ui, vi);
    throw EvalError(std::string(e.what()) + buf);
}

/// Fills the |U| x |V| matrix of pair values
///   1/2 tr(sigma sigma^T A) + b.p + g(t, x, rho_t y, p sigma, u, v).
void fill_pair_matrix(const GameProblem& problem, const HamiltonianInput& in,
                      std::vector<double>& matrix) {
    ProblemEval ev(problem);
    const int n = problem.state_dim;
    const int d = problem.noise_dim;
    const int nu = ev.num_u();
    const int nv = ev.num_v();

    ev.set_time(in.t);
    ev.set_state(in.x);
    double rho_t = ev.rho();
    double y_scaled = rho_t * in.y;

    std::vector<double> b(static_cast<std::size_t>(n));
    std::vector<double> sig(static_cast<std::size_t>(n * d));
    std::vector<double> z(static_cast<std::size_t>(d));

    matrix.assign(static_cast<std::size_t>(nu * nv), 0.0);
    for (int ui = 0; ui < nu; ++ui)
        for (int vi = 0; vi < nv; ++vi) {
            try {
                ev.set_control_pair(ui, vi);
                ev.drift(b);
                ev.sigma(sig);

                double trace_term = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double a_ij = in.A[static_cast<std::size_t>(i * n + j)];
                        if (a_ij == 0.0) continue;
                        double ssT = 0.0;
                        for (int k = 0; k < d; ++k)
                            ssT += sig[static_cast<std::size_t>(i * d + k)] *
                                   sig[static_cast<std::size_t>(j * d + k)];
                        trace_term += ssT * a_ij;
                    }

                double drift_term = 0.0;
                for (int i = 0; i < n; ++i)
                    drift_term += b[static_cast<std::size_t>(i)] * in.p[static_cast<std::size_t>(i)];

                for (int k = 0; k < d; ++k) {
                    double zk = 0.0;
                    for (int i = 0; i < n; ++i)
                        zk += in.p[static_cast<std::size_t>(i)] *
                              sig[static_cast<std::size_t>(i * d + k)];
                    z[static_cast<std::size_t>(k)] = zk;
                }

                matrix[static_cast<std::size_t>(ui * nv + vi)] =
                    0.5 * trace_term + drift_term + ev.generator(y_scaled, z);
            } catch (const EvalError& e) {
                rethrow_with_context(e, in, ui, vi);
            }
        }
}

} // namespace

MinimaxResult lower_hamiltonian(const GameProblem& problem, const HamiltonianInput& in) {
    std::vector<double> matrix;
    fill_pair_matrix(problem, in, matrix);
    int nv = static_cast<int>(problem.control_set_v.size());
    return minimax_sup_inf(static_cast<int>(problem.control_set_u.size()), nv,
                           [&](int ui, int vi) { return matrix[static_cast<std::size_t>(ui * nv + vi)]; });
}

MinimaxResult upper_hamiltonian(const GameProblem& problem, const HamiltonianInput& in) {
    std::vector<double> matrix;
    fill_pair_matrix(problem, in, matrix);
    int nv = static_cast<int>(problem.control_set_v.size());
    return minimax_inf_sup(static_cast<int>(problem.control_set_u.size()), nv,
                           [&](int ui, int vi) { return matrix[static_cast<std::size_t>(ui * nv + vi)]; });
}

double isaacs_gap(const GameProblem& problem, const HamiltonianInput& in) {
    // One shared value matrix keeps the minimax inequality exact in floating
    // point: both orders reduce identical entries.
    std::vector<double> matrix;
    fill_pair_matrix(problem, in, matrix);
    int nu = static_cast<int>(problem.control_set_u.size());
    int nv = static_cast<int>(problem.control_set_v.size());
    auto at = [&](int ui, int vi) { return matrix[static_cast<std::size_t>(ui * nv + vi)]; };
    double lo = minimax_sup_inf(nu, nv, at).value;
    double hi = minimax_inf_sup(nu, nv, at).value;
    return hi - lo;
}

double transformed_hamiltonian(const GameProblem& problem, const HamiltonianInput& in,
                               double gamma_0t) {
    HamiltonianInput scaled = in;
    scaled.y = in.y / gamma_0t;
    for (double& pi : scaled.p) pi /= gamma_0t;
    for (double& aij : scaled.A) aij /= gamma_0t;
    return gamma_0t * lower_hamiltonian(problem, scaled).value;
}

double transformed_hamiltonian(const GameProblem& problem, double t, const std::vector<double>& x,
                               double r, const std::vector<double>& p,
                               const std::vector<double>& A) {
    HamiltonianInput in(t, x, r, p, A);
    return transformed_hamiltonian(problem, in, gamma(problem, 0.0, t));
}

} // namespace isaacs
