#include "isaacs/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "isaacs/hamiltonian.hpp"
#include "isaacs/parallel.hpp"
#include "isaacs/rng.hpp"

namespace isaacs {

// ============================================================================
// ControlPolicy
// ============================================================================

ControlPolicy ControlPolicy::constant_pair(int u_index, int v_index) {
    ControlPolicy p;
    p.mode = Mode::ConstantPair;
    p.u_index = u_index;
    p.v_index = v_index;
    return p;
}

ControlPolicy ControlPolicy::feedback(const ValueField& field) {
    if (field.policy_u.empty())
        throw ConfigError("feedback policy requires a field solved with record_policy");
    ControlPolicy p;
    p.mode = Mode::FeedbackTable;
    p.table = &field;
    return p;
}

std::pair<int, int> ControlPolicy::at(double t, const std::vector<double>& x) const {
    if (mode == Mode::ConstantPair) return {u_index, v_index};
    const ValueField& f = *table;
    int layer = f.layer_of_t(t);
    std::size_t idx = 0;
    for (int i = 0; i < f.grid.dim(); ++i) {
        double h = f.grid.step(i);
        int cell = static_cast<int>(
            std::lround((x[static_cast<std::size_t>(i)] - f.grid.lo[static_cast<std::size_t>(i)]) / h));
        cell = std::clamp(cell, 0, f.grid.points[static_cast<std::size_t>(i)] - 1);
        idx = idx * static_cast<std::size_t>(f.grid.points[static_cast<std::size_t>(i)]) +
              static_cast<std::size_t>(cell);
    }
    std::size_t flat = static_cast<std::size_t>(layer) * f.num_points() + idx;
    return {f.policy_u[flat], f.policy_v[flat]};
}

// ============================================================================
// Forward simulation
// ============================================================================

PathBundle simulate_paths(const GameProblem& problem, const ControlPolicy& policy, double t0,
                          const std::vector<double>& x0, double dt, double T_max, int num_paths,
                          std::uint64_t seed, const std::optional<StateBox>& exit_box) {
    if (!(dt > 0)) throw ConfigError("simulate_paths requires dt > 0");
    if (num_paths < 1) throw ConfigError("simulate_paths requires at least one path");
    if (static_cast<int>(x0.size()) != problem.state_dim)
        throw ConfigError("x0 dimension mismatch");
    int steps = static_cast<int>(std::lround((T_max - t0) / dt));
    if (steps < 1) throw ConfigError("simulate_paths requires T_max > t0");

    PathBundle bundle;
    bundle.state_dim = problem.state_dim;
    bundle.noise_dim = problem.noise_dim;
    bundle.t0 = t0;
    bundle.dt = dt;
    bundle.steps = steps;
    bundle.num_paths = num_paths;
    bundle.seed = seed;
    bundle.x0 = x0;
    if (exit_box) {
        bundle.has_exit_box = true;
        bundle.exit_box = *exit_box;
        for (int i = 0; i < problem.state_dim; ++i)
            if (x0[static_cast<std::size_t>(i)] <= bundle.exit_box.lo[static_cast<std::size_t>(i)] ||
                x0[static_cast<std::size_t>(i)] >= bundle.exit_box.hi[static_cast<std::size_t>(i)])
                throw ConfigError("x0 must lie strictly inside the exit box");
    }

    const int n = problem.state_dim;
    const int d = problem.noise_dim;
    bundle.states.assign(static_cast<std::size_t>(num_paths) * (steps + 1) * n, 0.0);
    bundle.increments.assign(static_cast<std::size_t>(num_paths) * steps * d, 0.0);
    bundle.stop_index.assign(static_cast<std::size_t>(num_paths), steps);
    bundle.stop_kind.assign(static_cast<std::size_t>(num_paths), 0);

    CounterRng rng(seed);
    double sqrt_dt = std::sqrt(dt);

    parallel_for(static_cast<std::size_t>(num_paths), [&](std::size_t begin, std::size_t end) {
        ProblemEval ev(problem);
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<double> b(static_cast<std::size_t>(n));
        std::vector<double> sig(static_cast<std::size_t>(n * d));
        for (std::size_t p = begin; p < end; ++p) {
            double* st = bundle.states.data() + p * static_cast<std::size_t>(steps + 1) * n;
            double* inc = bundle.increments.data() + p * static_cast<std::size_t>(steps) * d;
            for (int i = 0; i < n; ++i) st[i] = x0[static_cast<std::size_t>(i)];
            int stop = steps;
            std::uint8_t kind = 0;
            for (int j = 0; j < steps; ++j) {
                double t = t0 + dt * j;
                for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = st[j * n + i];
                auto [ui, vi] = policy.at(t, x);
                try {
                    ev.set_time(t);
                    ev.set_state(x);
                    ev.set_control_pair(ui, vi);
                    ev.drift(b);
                    ev.sigma(sig);
                } catch (const EvalError& e) {
                    throw McError(std::string(e.what()) + " [path " + std::to_string(p) +
                                  ", step " + std::to_string(j) + "]");
                }
                for (int k = 0; k < d; ++k)
                    inc[j * d + k] =
                        sqrt_dt * rng.normal(p, static_cast<std::uint64_t>(j) * d + k);
                bool outside = false;
                for (int i = 0; i < n; ++i) {
                    double next = st[j * n + i] + b[static_cast<std::size_t>(i)] * dt;
                    for (int k = 0; k < d; ++k)
                        next += sig[static_cast<std::size_t>(i * d + k)] * inc[j * d + k];
                    if (!std::isfinite(next))
                        throw McError("non-finite state on path " + std::to_string(p) +
                                      " at step " + std::to_string(j));
                    st[(j + 1) * n + i] = next;
                }
                if (bundle.has_exit_box) {
                    for (int i = 0; i < n; ++i) {
                        double v = st[(j + 1) * n + i];
                        if (v < bundle.exit_box.lo[static_cast<std::size_t>(i)] ||
                            v > bundle.exit_box.hi[static_cast<std::size_t>(i)])
                            outside = true;
                    }
                }
                if (outside) {
                    stop = j + 1;
                    kind = 1;
                    for (int jj = j + 2; jj <= steps; ++jj)
                        for (int i = 0; i < n; ++i) st[jj * n + i] = st[(j + 1) * n + i];
                    break;
                }
            }
            bundle.stop_index[p] = stop;
            bundle.stop_kind[p] = kind;
        }
    }, 64);

    return bundle;
}

// ============================================================================
// Least-squares regression helpers
// ============================================================================

namespace {

int basis_size(int n) { return 1 + n + n * (n + 1) / 2; }

void fill_basis(const double* x, int n, double* phi) {
    phi[0] = 1.0;
    int idx = 1;
    for (int i = 0; i < n; ++i) phi[idx++] = x[i];
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) phi[idx++] = x[i] * x[j];
}

/// Solves the normal equations G c = r in place by LDL^T with column
/// dropping: pivots that fall below a relative tolerance get coefficient
/// zero (collinear basis columns, e.g. all paths at one point). The
/// intercept column is processed first and always survives.
void solve_normal_equations(std::vector<double>& G, std::vector<double>& r, int B,
                            std::vector<double>& c) {
    c.assign(static_cast<std::size_t>(B), 0.0);
    std::vector<double> diag0(static_cast<std::size_t>(B));
    for (int i = 0; i < B; ++i) diag0[static_cast<std::size_t>(i)] = G[static_cast<std::size_t>(i * B + i)];
    std::vector<bool> kept(static_cast<std::size_t>(B), false);

    // In-place LDL^T restricted to surviving columns.
    for (int k = 0; k < B; ++k) {
        double pivot = G[static_cast<std::size_t>(k * B + k)];
        double scale = std::max(diag0[static_cast<std::size_t>(k)], 1e-300);
        if (pivot <= 1e-11 * scale) continue; // dropped
        kept[static_cast<std::size_t>(k)] = true;
        for (int i = k + 1; i < B; ++i) {
            double f = G[static_cast<std::size_t>(i * B + k)] / pivot;
            for (int j = k; j < B; ++j)
                G[static_cast<std::size_t>(i * B + j)] -= f * G[static_cast<std::size_t>(k * B + j)];
            r[static_cast<std::size_t>(i)] -= f * r[static_cast<std::size_t>(k)];
            G[static_cast<std::size_t>(i * B + k)] = f;
        }
    }
    for (int k = B - 1; k >= 0; --k) {
        if (!kept[static_cast<std::size_t>(k)]) continue;
        double acc = r[static_cast<std::size_t>(k)];
        for (int j = k + 1; j < B; ++j)
            acc -= G[static_cast<std::size_t>(k * B + j)] * c[static_cast<std::size_t>(j)];
        c[static_cast<std::size_t>(k)] = acc / G[static_cast<std::size_t>(k * B + k)];
    }
}

double rho_max_on_mesh(const GameProblem& problem, const PathBundle& bundle, int jT) {
    ProblemEval ev(problem);
    double m = 0.0;
    for (int j = 0; j <= jT; ++j) {
        ev.set_time(bundle.t_of(j));
        m = std::max(m, ev.rho());
    }
    return m;
}

double sampled_Ly(const GameProblem& problem, const PathBundle& bundle) {
    ProblemEval ev(problem);
    std::vector<double> x(static_cast<std::size_t>(bundle.state_dim));
    std::vector<double> z(static_cast<std::size_t>(bundle.noise_dim), 0.0);
    double worst = 0.0;
    int pstride = std::max(1, bundle.num_paths / 4);
    int jstride = std::max(1, bundle.steps / 8);
    for (int p = 0; p < bundle.num_paths; p += pstride)
        for (int j = 0; j <= bundle.steps; j += jstride) {
            const double* st = bundle.state(p, j);
            for (int i = 0; i < bundle.state_dim; ++i) x[static_cast<std::size_t>(i)] = st[i];
            ev.set_time(bundle.t_of(j));
            ev.set_state(x);
            for (int ui = 0; ui < ev.num_u(); ++ui)
                for (int vi = 0; vi < ev.num_v(); ++vi) {
                    ev.set_control_pair(ui, vi);
                    try {
                        double g0 = ev.generator(-1.0, z);
                        double g1 = ev.generator(1.0, z);
                        worst = std::max(worst, 0.5 * std::fabs(g0 - g1));
                    } catch (const EvalError&) {
                    }
                }
        }
    return worst;
}

} // namespace

// ============================================================================
// Backward LSMC pass
// ============================================================================

BsdeEstimate solve_bsde_truncated(const PathBundle& bundle, const GameProblem& problem,
                                  const ControlPolicy& policy, double T,
                                  const Expr* terminal_psi) {
    const int n = bundle.state_dim;
    const int d = bundle.noise_dim;
    const int N = bundle.num_paths;
    const double dt = bundle.dt;
    int jT = static_cast<int>(std::lround((T - bundle.t0) / dt));
    if (jT < 1 || jT > bundle.steps)
        throw ConfigError("BSDE horizon must lie on the bundle mesh within T_max");

    double rho_max = rho_max_on_mesh(problem, bundle, jT);
    double L_y = sampled_Ly(problem, bundle);
    if (dt * rho_max * (1.0 + L_y) >= 1.0)
        throw McError("implicit-Y contraction violated: dt rho (1+L_y) = " +
                      std::to_string(dt * rho_max * (1.0 + L_y)) + " >= 1; reduce dt");

    VarLayout psi_layout{n, 0, 0, 0};
    std::vector<double> psi_slots(static_cast<std::size_t>(psi_layout.total()), 0.0);
    auto eval_psi = [&](const double* x) {
        for (int i = 0; i < n; ++i) psi_slots[static_cast<std::size_t>(1 + i)] = x[i];
        return terminal_psi->eval(psi_layout, psi_slots);
    };

    BsdeEstimate est;
    est.t0 = bundle.t0;
    est.horizon = bundle.t_of(jT);
    est.terminal_desc = terminal_psi ? terminal_psi->pretty() : "zero";
    est.paths = N;
    est.z0.assign(static_cast<std::size_t>(d), 0.0);
    est.cont_coeffs.assign(static_cast<std::size_t>(jT), {});
    est.layer_max_abs_y.assign(static_cast<std::size_t>(jT) + 1, 0.0);
    est.layer_mean_z_norm.assign(static_cast<std::size_t>(jT), 0.0);

    // Terminal values: psi at the exit state for exited paths, zero for
    // truncated survivors (psi at X_T when there is no exit box at all).
    std::vector<double> Y(static_cast<std::size_t>(N), 0.0);
    for (int p = 0; p < N; ++p) {
        bool exited = bundle.has_exit_box && bundle.stop_kind[static_cast<std::size_t>(p)] == 1 &&
                      bundle.stop_index[static_cast<std::size_t>(p)] <= jT;
        double value = 0.0;
        if (terminal_psi) {
            if (exited)
                value = eval_psi(bundle.state(p, bundle.stop_index[static_cast<std::size_t>(p)]));
            else if (!bundle.has_exit_box)
                value = eval_psi(bundle.state(p, jT));
        }
        Y[static_cast<std::size_t>(p)] = value;
        est.terminal_abs_max = std::max(est.terminal_abs_max, std::fabs(value));
        est.layer_max_abs_y[static_cast<std::size_t>(jT)] =
            std::max(est.layer_max_abs_y[static_cast<std::size_t>(jT)], std::fabs(value));
    }

    const int B = basis_size(n);
    std::vector<double> phi(static_cast<std::size_t>(B));
    std::vector<double> G(static_cast<std::size_t>(B * B));
    std::vector<double> rhs(static_cast<std::size_t>(B));
    std::vector<std::vector<double>> zrhs(static_cast<std::size_t>(d),
                                          std::vector<double>(static_cast<std::size_t>(B)));
    std::vector<double> c_cont(static_cast<std::size_t>(B));
    std::vector<std::vector<double>> c_z(static_cast<std::size_t>(d));
    std::vector<double> cont(static_cast<std::size_t>(N));
    std::vector<double> zval(static_cast<std::size_t>(N) * d);
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> zv(static_cast<std::size_t>(d));
    ProblemEval ev(problem);

    double se_targets_sd = 0.0;

    for (int j = jT - 1; j >= 0; --j) {
        double t_j = bundle.t_of(j);

        // Assemble the normal equations over paths alive at layer j.
        std::fill(G.begin(), G.end(), 0.0);
        std::fill(rhs.begin(), rhs.end(), 0.0);
        for (auto& zr : zrhs) std::fill(zr.begin(), zr.end(), 0.0);
        int alive = 0;
        for (int p = 0; p < N; ++p) {
            if (j >= bundle.stop_index[static_cast<std::size_t>(p)]) continue;
            ++alive;
            fill_basis(bundle.state(p, j), n, phi.data());
            double yp = Y[static_cast<std::size_t>(p)];
            const double* db = bundle.increment(p, j);
            for (int a = 0; a < B; ++a) {
                double pa = phi[static_cast<std::size_t>(a)];
                rhs[static_cast<std::size_t>(a)] += pa * yp;
                for (int k = 0; k < d; ++k)
                    zrhs[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] +=
                        pa * yp * db[k] / dt;
                for (int b2 = a; b2 < B; ++b2)
                    G[static_cast<std::size_t>(a * B + b2)] += pa * phi[static_cast<std::size_t>(b2)];
            }
        }
        if (alive == 0)
            throw McError("singular regression: no live paths at layer " + std::to_string(j));
        for (int a = 0; a < B; ++a)
            for (int b2 = 0; b2 < a; ++b2)
                G[static_cast<std::size_t>(a * B + b2)] = G[static_cast<std::size_t>(b2 * B + a)];

        {
            std::vector<double> Gc(G), rc(rhs);
            solve_normal_equations(Gc, rc, B, c_cont);
        }
        for (int k = 0; k < d; ++k) {
            std::vector<double> Gc(G), rc(zrhs[static_cast<std::size_t>(k)]);
            solve_normal_equations(Gc, rc, B, c_z[static_cast<std::size_t>(k)]);
        }
        est.cont_coeffs[static_cast<std::size_t>(j)] = c_cont;

        // Predictions at each live path.
        if (j == 0) {
            // Capture the spread of the regression targets for the SE.
            double mean = 0.0, m2 = 0.0;
            int cnt = 0;
            for (int p = 0; p < N; ++p) {
                if (0 >= bundle.stop_index[static_cast<std::size_t>(p)]) continue;
                ++cnt;
                double delta = Y[static_cast<std::size_t>(p)] - mean;
                mean += delta / cnt;
                m2 += delta * (Y[static_cast<std::size_t>(p)] - mean);
            }
            if (cnt > 1) se_targets_sd = std::sqrt(m2 / (cnt - 1) / cnt);
        }

        ev.set_time(t_j);
        double rho_j = ev.rho();
        double mean_znorm = 0.0;
        for (int p = 0; p < N; ++p) {
            if (j >= bundle.stop_index[static_cast<std::size_t>(p)]) continue;
            const double* xs = bundle.state(p, j);
            fill_basis(xs, n, phi.data());
            double cp = 0.0;
            for (int a = 0; a < B; ++a) cp += c_cont[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(a)];
            double zn = 0.0;
            for (int k = 0; k < d; ++k) {
                double zk = 0.0;
                for (int a = 0; a < B; ++a)
                    zk += c_z[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] *
                          phi[static_cast<std::size_t>(a)];
                zv[static_cast<std::size_t>(k)] = zk;
                zn += zk * zk;
            }
            mean_znorm += std::sqrt(zn);

            for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = xs[i];
            auto [ui, vi] = policy.at(t_j, x);
            ev.set_state(x);
            ev.set_control_pair(ui, vi);
            double yhat = cp;
            try {
                for (int it = 0; it < 2; ++it)
                    yhat = cp + dt * (ev.generator(rho_j * yhat, zv) - rho_j * yhat);
            } catch (const EvalError& e) {
                throw McError(std::string(e.what()) + " [t=" + std::to_string(t_j) + ", path " +
                              std::to_string(p) + "]");
            }
            Y[static_cast<std::size_t>(p)] = yhat;
            est.layer_max_abs_y[static_cast<std::size_t>(j)] =
                std::max(est.layer_max_abs_y[static_cast<std::size_t>(j)], std::fabs(yhat));
            if (j == 0) {
                for (int k = 0; k < d; ++k)
                    est.z0[static_cast<std::size_t>(k)] = zv[static_cast<std::size_t>(k)];
            }
        }
        est.layer_mean_z_norm[static_cast<std::size_t>(j)] = mean_znorm / alive;
    }

    // All paths share X_0 = x0, so layer 0 predictions coincide.
    double y0 = 0.0;
    int cnt = 0;
    for (int p = 0; p < N; ++p) {
        if (0 >= bundle.stop_index[static_cast<std::size_t>(p)]) continue;
        y0 += Y[static_cast<std::size_t>(p)];
        ++cnt;
    }
    est.y0 = y0 / cnt;
    est.se = se_targets_sd;
    return est;
}

// ============================================================================
// Infinite-horizon estimate by zero-terminal truncation
// ============================================================================

InfiniteBsdeResult estimate_infinite(const std::function<PathBundle(double)>& bundle_factory,
                                     const GameProblem& problem, const ControlPolicy& policy,
                                     double tol, const McRunOptions& options) {
    if (!(tol > 0)) throw ConfigError("estimate_infinite requires tol > 0");
    if (!(options.rho0 > 0))
        throw ConfigError("estimate_infinite requires rho0 > 0 from an assumption report");

    InfiniteBsdeResult out;
    double T = options.T0;
    PathBundle bundle = bundle_factory(T);
    BsdeEstimate prev = solve_bsde_truncated(bundle, problem, policy, T, nullptr);
    out.horizons.push_back(T);
    out.y0s.push_back(prev.y0);

    double delta = std::numeric_limits<double>::infinity();
    for (;;) {
        T += options.horizon_step;
        if (T > options.horizon_cap + 1e-9) break;
        bundle = bundle_factory(T);
        BsdeEstimate cur = solve_bsde_truncated(bundle, problem, policy, T, nullptr);
        delta = std::fabs(cur.y0 - prev.y0);
        out.horizons.push_back(T);
        out.y0s.push_back(cur.y0);
        out.deltas.push_back(delta);
        prev = std::move(cur);
        if (delta <= tol) {
            out.converged = true;
            break;
        }
    }
    out.tail_bound = delta / (1.0 - std::exp(-options.rho0 * options.horizon_step));
    out.estimate = std::move(prev);
    return out;
}

InfiniteBsdeResult estimate_infinite(const GameProblem& problem, const ControlPolicy& policy,
                                     double t0, const std::vector<double>& x0, double tol,
                                     const McRunOptions& options) {
    auto factory = [&](double T) {
        return simulate_paths(problem, policy, t0, x0, options.dt, T, options.paths,
                              options.seed);
    };
    return estimate_infinite(factory, problem, policy, tol, options);
}

} // namespace isaacs
