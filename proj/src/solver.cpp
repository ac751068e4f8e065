#include "isaacs/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "isaacs/hamiltonian.hpp"
#include "isaacs/parallel.hpp"
#include "isaacs/quadrature.hpp"

namespace isaacs {

const char* field_kind_name(FieldKind kind) {
    switch (kind) {
    case FieldKind::Lower: return "lower";
    case FieldKind::Upper: return "upper";
    case FieldKind::Stationary: return "stationary";
    case FieldKind::Transformed: return "transformed";
    }
    return "?";
}

// ============================================================================
// ValueField accessors
// ============================================================================

int ValueField::layer_of_t(double t) const {
    if (layers <= 1 || meta.dt <= 0) return 0;
    int j = static_cast<int>(std::lround(t / meta.dt));
    return std::clamp(j, 0, layers - 1);
}

std::vector<double> ValueField::point(std::size_t pt) const {
    int n = grid.dim();
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        std::size_t p = static_cast<std::size_t>(grid.points[static_cast<std::size_t>(i)]);
        x[static_cast<std::size_t>(i)] =
            grid.lo[static_cast<std::size_t>(i)] + grid.step(i) * static_cast<double>(pt % p);
        pt /= p;
    }
    return x;
}

double ValueField::interpolate(int layer, const std::vector<double>& x) const {
    int n = grid.dim();
    std::array<int, 8> base{};
    std::array<double, 8> frac{};
    for (int i = 0; i < n; ++i) {
        double h = grid.step(i);
        double rel = (x[static_cast<std::size_t>(i)] - grid.lo[static_cast<std::size_t>(i)]) / h;
        int cell = std::clamp(static_cast<int>(std::floor(rel)), 0,
                              grid.points[static_cast<std::size_t>(i)] - 2);
        base[static_cast<std::size_t>(i)] = cell;
        frac[static_cast<std::size_t>(i)] = std::clamp(rel - cell, 0.0, 1.0);
    }
    const double* data = values.data() + static_cast<std::size_t>(layer) * num_points();
    double acc = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        std::size_t idx = 0;
        for (int i = 0; i < n; ++i) {
            int bit = (corner >> i) & 1;
            w *= bit ? frac[static_cast<std::size_t>(i)] : 1.0 - frac[static_cast<std::size_t>(i)];
            idx = idx * static_cast<std::size_t>(grid.points[static_cast<std::size_t>(i)]) +
                  static_cast<std::size_t>(base[static_cast<std::size_t>(i)] + bit);
        }
        acc += w * data[idx];
    }
    return acc;
}

// ============================================================================
// Grid scaffolding
// ============================================================================

namespace {

struct GridLayout {
    int n = 0;
    std::array<int, 8> dims{};
    std::array<std::size_t, 8> strides{};
    std::array<double, 8> h{};
    std::array<double, 8> lo{};
    std::size_t npts = 1;

    explicit GridLayout(const GridSpec& g) {
        n = g.dim();
        for (int i = 0; i < n; ++i) {
            dims[static_cast<std::size_t>(i)] = g.points[static_cast<std::size_t>(i)];
            h[static_cast<std::size_t>(i)] = g.step(i);
            lo[static_cast<std::size_t>(i)] = g.lo[static_cast<std::size_t>(i)];
        }
        std::size_t s = 1;
        for (int i = n - 1; i >= 0; --i) {
            strides[static_cast<std::size_t>(i)] = s;
            s *= static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]);
        }
        npts = s;
    }

    void decode(std::size_t pt, std::array<int, 8>& mi) const {
        for (int i = n - 1; i >= 0; --i) {
            mi[static_cast<std::size_t>(i)] =
                static_cast<int>(pt % static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]));
            pt /= static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]);
        }
    }

    void coords(const std::array<int, 8>& mi, std::vector<double>& x) const {
        for (int i = 0; i < n; ++i)
            x[static_cast<std::size_t>(i)] =
                lo[static_cast<std::size_t>(i)] +
                h[static_cast<std::size_t>(i)] * mi[static_cast<std::size_t>(i)];
    }
};

/// Value at a multi-index that may run one cell past the box in any
/// dimension; out-of-range axes are filled per the boundary policy
/// (constant-slope extension or constant extension).
double ext_value(const double* data, std::array<int, 8>& mi, const GridLayout& gl,
                 BoundaryPolicy bc) {
    for (int k = 0; k < gl.n; ++k) {
        int idx = mi[static_cast<std::size_t>(k)];
        int nk = gl.dims[static_cast<std::size_t>(k)];
        if (idx >= 0 && idx < nk) continue;
        if (idx < 0) {
            mi[static_cast<std::size_t>(k)] = 0;
            double v0 = ext_value(data, mi, gl, bc);
            double out = v0;
            if (bc == BoundaryPolicy::LipschitzExtrapolation) {
                mi[static_cast<std::size_t>(k)] = 1;
                out = 2.0 * v0 - ext_value(data, mi, gl, bc);
            }
            mi[static_cast<std::size_t>(k)] = idx;
            return out;
        }
        mi[static_cast<std::size_t>(k)] = nk - 1;
        double v0 = ext_value(data, mi, gl, bc);
        double out = v0;
        if (bc == BoundaryPolicy::LipschitzExtrapolation) {
            mi[static_cast<std::size_t>(k)] = nk - 2;
            out = 2.0 * v0 - ext_value(data, mi, gl, bc);
        }
        mi[static_cast<std::size_t>(k)] = idx;
        return out;
    }
    std::size_t idx = 0;
    for (int k = 0; k < gl.n; ++k)
        idx += static_cast<std::size_t>(mi[static_cast<std::size_t>(k)]) *
               gl.strides[static_cast<std::size_t>(k)];
    return data[idx];
}

// ============================================================================
// CFL bound
// ============================================================================

double internal_Ly_estimate(const GameProblem& problem, const GridSpec& grid, double t_max) {
    ProblemEval ev(problem);
    GridLayout gl(grid);
    std::vector<double> x(static_cast<std::size_t>(gl.n));
    std::vector<double> z(static_cast<std::size_t>(problem.noise_dim), 0.0);
    std::array<int, 8> mi{};
    double worst = 0.0;
    const double times[3] = {0.0, 0.5 * t_max, t_max};
    const double ypairs[3][2] = {{-1.0, 1.0}, {0.0, 0.5}, {-0.25, 0.25}};
    std::size_t stride = std::max<std::size_t>(1, gl.npts / 16);
    for (double t : times) {
        ev.set_time(t);
        for (std::size_t pt = 0; pt < gl.npts; pt += stride) {
            gl.decode(pt, mi);
            gl.coords(mi, x);
            ev.set_state(x);
            for (int ui = 0; ui < ev.num_u(); ++ui)
                for (int vi = 0; vi < ev.num_v(); ++vi) {
                    ev.set_control_pair(ui, vi);
                    for (const auto& yp : ypairs) {
                        try {
                            double g0 = ev.generator(yp[0], z);
                            double g1 = ev.generator(yp[1], z);
                            worst = std::max(worst, std::fabs(g0 - g1) / std::fabs(yp[1] - yp[0]));
                        } catch (const EvalError&) {
                        }
                    }
                }
        }
    }
    return worst;
}

} // namespace

double cfl_time_step_limit(const GameProblem& problem, const GridSpec& grid, double t_max,
                           double L_y) {
    GridLayout gl(grid);
    ProblemEval ev(problem);
    const int n = gl.n;
    const int d = problem.noise_dim;
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> b(static_cast<std::size_t>(n));
    std::vector<double> sig(static_cast<std::size_t>(n * d));
    std::array<int, 8> mi{};

    std::vector<double> max_diag(static_cast<std::size_t>(n), 0.0);
    std::vector<double> max_drift(static_cast<std::size_t>(n), 0.0);

    std::size_t stride = std::max<std::size_t>(1, gl.npts / 2048);
    for (int ti = 0; ti <= 8; ++ti) {
        double t = t_max * ti / 8.0;
        ev.set_time(t);
        for (std::size_t pt = 0; pt < gl.npts; pt += stride) {
            gl.decode(pt, mi);
            gl.coords(mi, x);
            ev.set_state(x);
            for (int ui = 0; ui < ev.num_u(); ++ui)
                for (int vi = 0; vi < ev.num_v(); ++vi) {
                    ev.set_control_pair(ui, vi);
                    ev.drift(b);
                    ev.sigma(sig);
                    for (int i = 0; i < n; ++i) {
                        double ss = 0.0;
                        for (int k = 0; k < d; ++k) {
                            double s = sig[static_cast<std::size_t>(i * d + k)];
                            ss += s * s;
                        }
                        max_diag[static_cast<std::size_t>(i)] =
                            std::max(max_diag[static_cast<std::size_t>(i)], ss);
                        max_drift[static_cast<std::size_t>(i)] =
                            std::max(max_drift[static_cast<std::size_t>(i)],
                                     std::fabs(b[static_cast<std::size_t>(i)]));
                    }
                }
        }
    }

    double max_rho = 0.0;
    for (int i = 0; i <= 128; ++i) {
        ev.set_time(t_max * i / 128.0);
        max_rho = std::max(max_rho, ev.rho());
    }

    double L_y_eff = std::max(L_y, internal_Ly_estimate(problem, grid, t_max));
    double denom = max_rho * (1.0 + L_y_eff);
    for (int i = 0; i < n; ++i) {
        double hi = gl.h[static_cast<std::size_t>(i)];
        denom += max_diag[static_cast<std::size_t>(i)] / (hi * hi) +
                 max_drift[static_cast<std::size_t>(i)] / hi;
    }
    return denom > 0.0 ? 1.0 / denom : 1.0;
}

// ============================================================================
// Backward march
// ============================================================================

namespace {

struct MarchSpec {
    double dt = 0.0;
    int total_steps = 0;   // horizon T = total_steps * dt
    int window_layers = 0; // stored layers - 1
    FieldKind kind = FieldKind::Lower;
    bool transformed = false;
    bool record_policy = false;
    double cfl_limit = 0.0;
};

[[noreturn]] void nonfinite_abort(double t, const std::vector<double>& x) {
    std::string xs;
    for (double xi : x) {
        char num[32];
        std::snprintf(num, sizeof(num), "%s%.6g", xs.empty() ? "" : ",", xi);
        xs += num;
    }
    throw SolverError("non-finite value encountered at t=" + std::to_string(t) + ", x=(" + xs +
                      ")");
}

/// Computes one backward step: out = step(t_known, in). gamma_t is
/// Gamma_{0, t_known} (ignored in direct mode). Optionally records the
/// saddle control indices per point.
void compute_layer(const GameProblem& problem, const GridSpec& grid, const GridLayout& gl,
                   const MarchSpec& ms, double t_known, double gamma_t,
                   const std::vector<double>& in, std::vector<double>& out,
                   std::uint16_t* pol_u, std::uint16_t* pol_v) {
    const int n = gl.n;
    const int d = problem.noise_dim;
    const int nu = static_cast<int>(problem.control_set_u.size());
    const int nv = static_cast<int>(problem.control_set_v.size());
    const double* data = in.data();
    const bool cross_terms = n >= 2;

    parallel_for(gl.npts, [&](std::size_t begin, std::size_t end) {
        ProblemEval ev(problem);
        ev.set_time(t_known);
        double rho_t = ev.rho();

        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<double> b(static_cast<std::size_t>(n));
        std::vector<double> sig(static_cast<std::size_t>(n * d));
        std::vector<double> z(static_cast<std::size_t>(d));
        std::vector<double> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n)),
            diag2(static_cast<std::size_t>(n));
        std::vector<double> cross(static_cast<std::size_t>(n * n), 0.0);
        std::array<int, 8> mi{};

        for (std::size_t pt = begin; pt < end; ++pt) {
            gl.decode(pt, mi);
            gl.coords(mi, x);
            double wc = data[pt];

            for (int i = 0; i < n; ++i) {
                double hi = gl.h[static_cast<std::size_t>(i)];
                mi[static_cast<std::size_t>(i)] += 1;
                double wp = ext_value(data, mi, gl, grid.boundary);
                mi[static_cast<std::size_t>(i)] -= 2;
                double wm = ext_value(data, mi, gl, grid.boundary);
                mi[static_cast<std::size_t>(i)] += 1;
                fwd[static_cast<std::size_t>(i)] = (wp - wc) / hi;
                bwd[static_cast<std::size_t>(i)] = (wc - wm) / hi;
                diag2[static_cast<std::size_t>(i)] = (wp - 2.0 * wc + wm) / (hi * hi);
            }
            if (cross_terms) {
                for (int i = 0; i < n; ++i)
                    for (int j = i + 1; j < n; ++j) {
                        double acc = 0.0;
                        for (int si = -1; si <= 1; si += 2)
                            for (int sj = -1; sj <= 1; sj += 2) {
                                mi[static_cast<std::size_t>(i)] += si;
                                mi[static_cast<std::size_t>(j)] += sj;
                                acc += si * sj * ext_value(data, mi, gl, grid.boundary);
                                mi[static_cast<std::size_t>(i)] -= si;
                                mi[static_cast<std::size_t>(j)] -= sj;
                            }
                        cross[static_cast<std::size_t>(i * n + j)] =
                            acc / (4.0 * gl.h[static_cast<std::size_t>(i)] *
                                   gl.h[static_cast<std::size_t>(j)]);
                    }
            }

            ev.set_state(x);
            auto pair_value = [&](int ui, int vi) {
                ev.set_control_pair(ui, vi);
                ev.drift(b);
                ev.sigma(sig);
                double drift_term = 0.0;
                for (int i = 0; i < n; ++i) {
                    double pi = b[static_cast<std::size_t>(i)] >= 0.0
                                    ? fwd[static_cast<std::size_t>(i)]
                                    : bwd[static_cast<std::size_t>(i)];
                    drift_term += b[static_cast<std::size_t>(i)] * pi;
                    for (int k = 0; k < d; ++k)
                        z[static_cast<std::size_t>(k)] =
                            (i == 0 ? 0.0 : z[static_cast<std::size_t>(k)]) +
                            pi * sig[static_cast<std::size_t>(i * d + k)];
                }
                double trace_term = 0.0;
                for (int i = 0; i < n; ++i) {
                    double ss = 0.0;
                    for (int k = 0; k < d; ++k) {
                        double s = sig[static_cast<std::size_t>(i * d + k)];
                        ss += s * s;
                    }
                    trace_term += ss * diag2[static_cast<std::size_t>(i)];
                    for (int j = i + 1; j < n; ++j) {
                        double ssij = 0.0;
                        for (int k = 0; k < d; ++k)
                            ssij += sig[static_cast<std::size_t>(i * d + k)] *
                                    sig[static_cast<std::size_t>(j * d + k)];
                        trace_term += 2.0 * ssij * cross[static_cast<std::size_t>(i * n + j)];
                    }
                }
                double gval;
                if (!ms.transformed) {
                    gval = ev.generator(rho_t * wc, z);
                } else {
                    std::vector<double> zs(z);
                    for (double& zk : zs) zk /= gamma_t;
                    gval = gamma_t * ev.generator(rho_t * wc / gamma_t, zs);
                }
                return 0.5 * trace_term + drift_term + gval;
            };

            MinimaxResult mm;
            try {
                mm = (ms.kind == FieldKind::Upper) ? minimax_inf_sup(nu, nv, pair_value)
                                                   : minimax_sup_inf(nu, nv, pair_value);
            } catch (const EvalError& e) {
                std::string xs;
                for (double xi : x) {
                    char num[32];
                    std::snprintf(num, sizeof(num), "%s%.6g", xs.empty() ? "" : ",", xi);
                    xs += num;
                }
                throw EvalError(std::string(e.what()) + " [t=" + std::to_string(t_known) +
                                " x=(" + xs + ")]");
            }

            double next = ms.transformed ? wc + ms.dt * mm.value
                                         : wc + ms.dt * (mm.value - rho_t * wc);
            if (!std::isfinite(next)) nonfinite_abort(t_known, x);
            out[pt] = next;
            if (pol_u) {
                pol_u[pt] = static_cast<std::uint16_t>(mm.u_index);
                pol_v[pt] = static_cast<std::uint16_t>(mm.v_index);
            }
        }
    });
}

/// Full backward march from W(T,.) = 0, returning the layers in
/// [0, window]. gamma_integrals (transformed mode) holds cumulative
/// int_0^{t_j} rho for every mesh time.
ValueField march(const GameProblem& problem, const GridSpec& grid, const MarchSpec& ms,
                 const std::vector<double>* gamma_integrals) {
    GridLayout gl(grid);
    ValueField out;
    out.grid = grid;
    out.kind = ms.kind;
    out.layers = ms.window_layers + 1;
    out.values.assign(static_cast<std::size_t>(out.layers) * gl.npts, 0.0);
    out.meta.dt = ms.dt;
    out.meta.h.assign(gl.h.begin(), gl.h.begin() + gl.n);
    out.meta.window_end = ms.window_layers * ms.dt;
    out.meta.horizon = ms.total_steps * ms.dt;
    out.meta.minimax = ms.kind == FieldKind::Upper ? "inf-sup" : "sup-inf";
    out.meta.cfl_limit = ms.cfl_limit;
    if (ms.record_policy) {
        out.policy_u.assign(out.values.size(), 0);
        out.policy_v.assign(out.values.size(), 0);
    }

    std::vector<double> current(gl.npts, 0.0); // terminal data: zero
    std::vector<double> next(gl.npts, 0.0);

    auto store = [&](int layer, const std::vector<double>& src) {
        double scale = 1.0;
        if (ms.transformed) {
            double gamma_j = std::exp(-(*gamma_integrals)[static_cast<std::size_t>(layer)]);
            scale = 1.0 / gamma_j;
        }
        double* dst = out.values.data() + static_cast<std::size_t>(layer) * gl.npts;
        if (scale == 1.0)
            std::copy(src.begin(), src.end(), dst);
        else
            for (std::size_t i = 0; i < gl.npts; ++i) dst[i] = src[i] * scale;
    };

    if (ms.total_steps <= ms.window_layers) store(ms.total_steps, current);

    for (int j = ms.total_steps - 1; j >= 0; --j) {
        double t_known = ms.dt * (j + 1);
        double gamma_t = 1.0;
        if (ms.transformed)
            gamma_t = std::exp(-(*gamma_integrals)[static_cast<std::size_t>(j + 1)]);
        bool keep = j <= ms.window_layers;
        std::uint16_t* pu = nullptr;
        std::uint16_t* pv = nullptr;
        if (keep && ms.record_policy) {
            pu = out.policy_u.data() + static_cast<std::size_t>(j) * gl.npts;
            pv = out.policy_v.data() + static_cast<std::size_t>(j) * gl.npts;
        }
        compute_layer(problem, grid, gl, ms, t_known, gamma_t, current, next, pu, pv);
        if (keep) store(j, next);
        std::swap(current, next);
    }

    if (ms.transformed)
        out.meta.transform_t0_bitexact =
            std::exp(-(*gamma_integrals)[0]) == 1.0; // Gamma_{0,0} = 1 exactly
    return out;
}

struct TimeMesh {
    double dt = 0.0;
    int steps_per_horizon = 0; // horizon_step / dt
    int window_layers = 0;     // S_used / dt
    double cfl_limit = 0.0;
};

TimeMesh resolve_mesh(const GameProblem& problem, const GridSpec& grid,
                      const SolveControls& controls, double t_max) {
    TimeMesh tm;
    tm.cfl_limit = cfl_time_step_limit(problem, grid, t_max, controls.L_y);
    double dt_req = grid.dt > 0 ? grid.dt : grid.cfl_safety * tm.cfl_limit;
    if (dt_req > tm.cfl_limit * (1.0 + 1e-12))
        throw SolverError("requested dt " + std::to_string(dt_req) +
                          " violates the CFL bound " + std::to_string(tm.cfl_limit));
    tm.steps_per_horizon =
        static_cast<int>(std::ceil(controls.horizon_step / dt_req - 1e-12));
    tm.dt = controls.horizon_step / tm.steps_per_horizon;
    tm.window_layers =
        std::max(1, static_cast<int>(std::lround(grid.window_end / tm.dt)));
    return tm;
}

void fit_trace(TruncationTrace& trace) {
    double dmax = 0.0;
    for (double d : trace.deltas) dmax = std::max(dmax, d);
    double floor = std::max(1e-300, 1e-10 * dmax);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < trace.deltas.size(); ++i) {
        if (trace.deltas[i] > floor) {
            xs.push_back(trace.horizons[i]);
            ys.push_back(std::log(trace.deltas[i]));
        }
    }
    trace.fit_points = static_cast<int>(xs.size());
    if (xs.size() < 2) {
        trace.fitted_rate = 0.0;
        trace.fit_residual = 0.0;
        return;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    trace.fitted_rate = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double pred = my + trace.fitted_rate * (xs[i] - mx);
        rss += (ys[i] - pred) * (ys[i] - pred);
    }
    trace.fit_residual = std::sqrt(rss / xs.size());
}

double sup_distance(const ValueField& a, const ValueField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::fabs(a.values[i] - b.values[i]));
    return m;
}

InfiniteSolveResult horizon_continuation(const GameProblem& problem, const GridSpec& grid,
                                         FieldKind kind, const SolveControls& controls,
                                         bool transformed) {
    if (!(controls.rho0 > 0))
        throw ConfigError("horizon continuation requires rho0 > 0 from an assumption report");
    if (!(controls.tol > 0)) throw ConfigError("tolerance must be positive");

    TimeMesh tm = resolve_mesh(problem, grid, controls, controls.horizon_cap);

    MarchSpec ms;
    ms.dt = tm.dt;
    ms.window_layers = tm.window_layers;
    ms.kind = kind;
    ms.transformed = transformed;
    ms.record_policy = controls.record_policy;
    ms.cfl_limit = tm.cfl_limit;

    double S_used = tm.window_layers * tm.dt;

    // Cumulative discount integrals on the mesh, extended lazily as the
    // horizon grows (transformed mode only).
    std::vector<double> gamma_integrals{0.0};
    VarLayout layout = problem.layout();
    std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
    auto rho_of = [&](double r) {
        slots[0] = r;
        return problem.discount.eval(layout, slots);
    };
    auto extend_gamma = [&](int steps) {
        while (static_cast<int>(gamma_integrals.size()) <= steps) {
            std::size_t j = gamma_integrals.size() - 1;
            double t0 = tm.dt * static_cast<double>(j);
            gamma_integrals.push_back(gamma_integrals.back() +
                                      integrate(rho_of, t0, t0 + tm.dt, 1e-13));
        }
    };

    TruncationTrace trace;
    trace.rho0 = controls.rho0;
    trace.horizon_step = controls.horizon_step;

    ms.total_steps = tm.window_layers;
    if (transformed) extend_gamma(ms.total_steps);
    ValueField prev = march(problem, grid, ms, &gamma_integrals);
    trace.horizons.push_back(S_used);

    double delta = std::numeric_limits<double>::infinity();
    for (int k = 1;; ++k) {
        double horizon = S_used + k * controls.horizon_step;
        if (horizon > controls.horizon_cap + 1e-9) break;
        ms.total_steps = tm.window_layers + k * tm.steps_per_horizon;
        if (transformed) extend_gamma(ms.total_steps);
        ValueField cur = march(problem, grid, ms, &gamma_integrals);
        delta = sup_distance(cur, prev);
        trace.horizons.push_back(horizon);
        trace.deltas.push_back(delta);
        prev = std::move(cur);
        if (delta <= controls.tol) {
            trace.converged = true;
            break;
        }
    }
    trace.tail_bound = delta / (1.0 - std::exp(-controls.rho0 * controls.horizon_step));
    fit_trace(trace);

    prev.meta.infinite = true;
    prev.meta.tail_bound = trace.tail_bound;
    InfiniteSolveResult out;
    out.field = std::move(prev);
    out.trace = std::move(trace);
    return out;
}

} // namespace

// ============================================================================
// Public operations
// ============================================================================

ValueField solve_finite(const GameProblem& problem, const GridSpec& grid, double T,
                        FieldKind kind, const SolveControls& controls) {
    if (kind != FieldKind::Lower && kind != FieldKind::Upper)
        throw ConfigError("solve_finite kind must be lower or upper");
    if (T < grid.window_end - 1e-12)
        throw ConfigError("horizon T must be at least the grid window end");

    double cfl_limit = cfl_time_step_limit(problem, grid, T, controls.L_y);
    double dt_req = grid.dt > 0 ? grid.dt : grid.cfl_safety * cfl_limit;
    if (dt_req > cfl_limit * (1.0 + 1e-12))
        throw SolverError("requested dt " + std::to_string(dt_req) +
                          " violates the CFL bound " + std::to_string(cfl_limit));
    int steps = std::max(1, static_cast<int>(std::ceil(T / dt_req - 1e-9)));

    MarchSpec ms;
    ms.dt = T / steps;
    ms.total_steps = steps;
    ms.window_layers =
        std::min(steps, std::max(1, static_cast<int>(std::floor(grid.window_end / ms.dt + 1e-9))));
    ms.kind = kind;
    ms.record_policy = controls.record_policy;
    ms.cfl_limit = cfl_limit;
    return march(problem, grid, ms, nullptr);
}

InfiniteSolveResult solve_infinite(const GameProblem& problem, const GridSpec& grid,
                                   FieldKind kind, const SolveControls& controls) {
    if (kind != FieldKind::Lower && kind != FieldKind::Upper)
        throw ConfigError("solve_infinite kind must be lower or upper");
    return horizon_continuation(problem, grid, kind, controls, false);
}

InfiniteSolveResult solve_transformed(const GameProblem& problem, const GridSpec& grid,
                                      const SolveControls& controls) {
    InfiniteSolveResult transformed = horizon_continuation(problem, grid, FieldKind::Lower,
                                                           controls, true);
    transformed.field.kind = FieldKind::Transformed;

    InfiniteSolveResult direct = horizon_continuation(problem, grid, FieldKind::Lower, controls,
                                                      false);
    transformed.field.meta.transform_discrepancy =
        sup_distance(transformed.field, direct.field);
    return transformed;
}

ValueField solve_stationary(const GameProblem& problem, const GridSpec& grid, FieldKind kind,
                            const SolveControls& controls) {
    if (kind != FieldKind::Lower && kind != FieldKind::Upper)
        throw ConfigError("solve_stationary kind must select sup-inf or inf-sup");
    if (!problem.autonomous_flag)
        throw ConfigError("solve_stationary requires an autonomous problem");

    ProblemEval ev(problem);
    ev.set_time(0.0);
    double rho = ev.rho();
    if (!(rho > 0)) throw ConfigError("solve_stationary requires a positive constant discount");

    double cfl_limit = cfl_time_step_limit(problem, grid, 1.0, controls.L_y);
    double dt = grid.dt > 0 ? grid.dt : grid.cfl_safety * cfl_limit;
    if (dt > cfl_limit * (1.0 + 1e-12))
        throw SolverError("requested dt " + std::to_string(dt) + " violates the CFL bound " +
                          std::to_string(cfl_limit));

    GridLayout gl(grid);
    MarchSpec ms;
    ms.dt = dt;
    ms.kind = kind;
    ms.cfl_limit = cfl_limit;

    std::vector<double> w(gl.npts, 0.0), w2(gl.npts, 0.0);
    double threshold = controls.tol * dt * rho; // tol * (1 - contraction factor)
    double prev_update = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    long cap = std::lround(std::ceil(60.0 / (dt * rho))) + 1000;

    bool converged = false;
    for (long sweep = 0; sweep < cap; ++sweep) {
        compute_layer(problem, grid, gl, ms, 0.0, 1.0, w, w2, nullptr, nullptr);
        double update = 0.0;
        for (std::size_t i = 0; i < gl.npts; ++i)
            update = std::max(update, std::fabs(w2[i] - w[i]));
        std::swap(w, w2);
        if (update <= threshold) {
            converged = true;
            break;
        }
        if (update > prev_update) {
            if (++growth_streak >= 10)
                throw SolverError("stationary value iteration is not contracting");
        } else {
            growth_streak = 0;
        }
        prev_update = update;
    }
    if (!converged)
        throw SolverError("stationary value iteration hit the sweep cap before tolerance");

    ValueField out;
    out.grid = grid;
    out.kind = FieldKind::Stationary;
    out.layers = 1;
    out.values = std::move(w);
    out.meta.dt = dt;
    out.meta.h.assign(gl.h.begin(), gl.h.begin() + gl.n);
    out.meta.window_end = 0.0;
    out.meta.minimax = kind == FieldKind::Upper ? "inf-sup" : "sup-inf";
    out.meta.cfl_limit = cfl_limit;
    return out;
}

GapScan isaacs_scan(const GameProblem& problem, const ValueField& field, int layer_stride) {
    GridLayout gl(field.grid);
    const int n = gl.n;
    int stride = std::max(layer_stride, field.layers / 64);
    stride = std::max(stride, 1);

    GapScan scan;
    scan.x.assign(static_cast<std::size_t>(n), 0.0);
    std::array<int, 8> mi{};
    std::vector<double> x(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    std::vector<double> A(static_cast<std::size_t>(n * n), 0.0);

    for (int layer = 0; layer < field.layers; layer += stride) {
        const double* data = field.values.data() + static_cast<std::size_t>(layer) * gl.npts;
        double t = field.t_of_layer(layer);
        for (std::size_t pt = 0; pt < gl.npts; ++pt) {
            gl.decode(pt, mi);
            gl.coords(mi, x);
            double wc = data[pt];
            for (int i = 0; i < n; ++i) {
                double hi = gl.h[static_cast<std::size_t>(i)];
                mi[static_cast<std::size_t>(i)] += 1;
                double wp = ext_value(data, mi, gl, field.grid.boundary);
                mi[static_cast<std::size_t>(i)] -= 2;
                double wm = ext_value(data, mi, gl, field.grid.boundary);
                mi[static_cast<std::size_t>(i)] += 1;
                p[static_cast<std::size_t>(i)] = (wp - wm) / (2.0 * hi);
                A[static_cast<std::size_t>(i * n + i)] = (wp - 2.0 * wc + wm) / (hi * hi);
            }
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double acc = 0.0;
                    for (int si = -1; si <= 1; si += 2)
                        for (int sj = -1; sj <= 1; sj += 2) {
                            mi[static_cast<std::size_t>(i)] += si;
                            mi[static_cast<std::size_t>(j)] += sj;
                            acc += si * sj * ext_value(data, mi, gl, field.grid.boundary);
                            mi[static_cast<std::size_t>(i)] -= si;
                            mi[static_cast<std::size_t>(j)] -= sj;
                        }
                    double val = acc / (4.0 * gl.h[static_cast<std::size_t>(i)] *
                                        gl.h[static_cast<std::size_t>(j)]);
                    A[static_cast<std::size_t>(i * n + j)] = val;
                    A[static_cast<std::size_t>(j * n + i)] = val;
                }
            HamiltonianInput in(t, x, wc, p, A);
            double gap = isaacs_gap(problem, in);
            if (gap > scan.max_gap) {
                scan.max_gap = gap;
                scan.t = t;
                scan.x = x;
            }
        }
    }
    return scan;
}

} // namespace isaacs
