#include "isaacs/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "isaacs/quadrature.hpp"

namespace isaacs {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Max |W| over stored layers, excluding a per-side margin fraction of the
/// spatial box in every dimension.
double max_abs_interior(const ValueField& field, double margin_fraction) {
    const GridSpec& g = field.grid;
    int n = g.dim();
    std::vector<int> lo_idx(static_cast<std::size_t>(n)), hi_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int pts = g.points[static_cast<std::size_t>(i)];
        int margin = static_cast<int>(std::ceil(margin_fraction * (pts - 1)));
        lo_idx[static_cast<std::size_t>(i)] = margin;
        hi_idx[static_cast<std::size_t>(i)] = pts - 1 - margin;
        if (lo_idx[static_cast<std::size_t>(i)] > hi_idx[static_cast<std::size_t>(i)]) {
            lo_idx[static_cast<std::size_t>(i)] = pts / 2;
            hi_idx[static_cast<std::size_t>(i)] = pts / 2;
        }
    }
    double m = 0.0;
    std::size_t npts = field.num_points();
    for (int layer = 0; layer < field.layers; ++layer) {
        const double* data = field.values.data() + static_cast<std::size_t>(layer) * npts;
        for (std::size_t pt = 0; pt < npts; ++pt) {
            std::size_t rest = pt;
            bool interior = true;
            for (int i = n - 1; i >= 0; --i) {
                int idx = static_cast<int>(rest % static_cast<std::size_t>(g.points[static_cast<std::size_t>(i)]));
                rest /= static_cast<std::size_t>(g.points[static_cast<std::size_t>(i)]);
                if (idx < lo_idx[static_cast<std::size_t>(i)] || idx > hi_idx[static_cast<std::size_t>(i)]) {
                    interior = false;
                    break;
                }
            }
            if (interior) m = std::max(m, std::fabs(data[pt]));
        }
    }
    return m;
}

double sup_abs_layer(const ValueField& field, int layer) {
    double m = 0.0;
    std::size_t npts = field.num_points();
    const double* data = field.values.data() + static_cast<std::size_t>(layer) * npts;
    for (std::size_t pt = 0; pt < npts; ++pt) m = std::max(m, std::fabs(data[pt]));
    return m;
}

} // namespace

CheckReport check_truncation_rate(const TruncationTrace& trace, double rho0, double rate_slack) {
    if (trace.fit_points < 4)
        throw ConfigError("truncation-rate check needs at least 4 trace points above the "
                          "noise floor, got " +
                          std::to_string(trace.fit_points));
    CheckReport r;
    r.name = "truncation-rate";
    r.inequality = "fit slope of log delta_k vs T_k <= -rho0 (1 - " + fmt(rate_slack) + ")";
    r.measured = trace.fitted_rate;
    r.bound = -rho0 * (1.0 - rate_slack);
    r.slack = 0.0;
    r.pass = r.measured <= r.bound + r.slack;
    r.detail = "fit over " + std::to_string(trace.fit_points) +
               " points, residual " + fmt(trace.fit_residual);
    return r;
}

CheckReport check_bounds(const ValueField& field, const Bounds& bounds, double bound_slack,
                         double margin_fraction) {
    CheckReport r;
    r.name = "uniform-bound";
    r.inequality = "max interior |W| <= M1_inf (1 + " + fmt(bound_slack) + ")";
    r.measured = max_abs_interior(field, margin_fraction);
    r.bound = bounds.M1_inf;
    r.slack = bound_slack * bounds.M1_inf;
    r.pass = r.measured <= r.bound + r.slack;
    r.detail = "M1_inf = " + fmt(bounds.M1_inf) + ", margin " + fmt(margin_fraction);
    return r;
}

CheckReport check_lipschitz(const ValueField& field, const Bounds& bounds,
                            double lipschitz_slack) {
    CheckReport r;
    r.name = "value-lipschitz";
    r.inequality = "max adjacent slope of W(0,.) <= Lip_W (1 + " + fmt(lipschitz_slack) + ")";
    if (!bounds.Lip_W) {
        r.skipped = true;
        r.pass = true;
        r.detail = "Lip_W unavailable (dissipativity mu > -rho0 not certified)";
        return r;
    }
    const GridSpec& g = field.grid;
    int n = g.dim();
    const double* data = field.values.data(); // t = 0 layer
    double worst = 0.0;
    std::size_t npts = field.num_points();
    // Adjacent differences along each axis.
    std::vector<std::size_t> stride(static_cast<std::size_t>(n));
    std::size_t s = 1;
    for (int i = n - 1; i >= 0; --i) {
        stride[static_cast<std::size_t>(i)] = s;
        s *= static_cast<std::size_t>(g.points[static_cast<std::size_t>(i)]);
    }
    for (std::size_t pt = 0; pt < npts; ++pt) {
        std::size_t rest = pt;
        std::vector<int> mi(static_cast<std::size_t>(n));
        for (int i = n - 1; i >= 0; --i) {
            mi[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(g.points[static_cast<std::size_t>(i)]));
            rest /= static_cast<std::size_t>(g.points[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n; ++i) {
            if (mi[static_cast<std::size_t>(i)] + 1 >= g.points[static_cast<std::size_t>(i)]) continue;
            double diff = std::fabs(data[pt + stride[static_cast<std::size_t>(i)]] - data[pt]);
            worst = std::max(worst, diff / g.step(i));
        }
    }
    r.measured = worst;
    r.bound = *bounds.Lip_W;
    r.slack = lipschitz_slack * *bounds.Lip_W;
    r.pass = r.measured <= r.bound + r.slack;
    r.detail = "Lip_W = " + fmt(*bounds.Lip_W);
    return r;
}

std::vector<CheckReport> check_boundary_decay(const GameProblem& problem,
                                              const ValueField& field, const Bounds& bounds,
                                              const AssumptionReport& report,
                                              double scheme_slack, double quad_window) {
    std::vector<CheckReport> out;

    // Sampled layer times: quarters of the window plus the endpoints.
    std::vector<int> layers;
    for (int q = 0; q <= 4; ++q) {
        int layer = std::min(field.layers - 1, (field.layers - 1) * q / 4);
        if (layers.empty() || layers.back() != layer) layers.push_back(layer);
    }

    {
        CheckReport r;
        r.name = "discounted-decay";
        r.inequality = "Gamma_{0,t} sup_x |W(t,.)| <= exp(-rho0 t) M1_inf + slack";
        double worst = -std::numeric_limits<double>::infinity();
        std::string detail;
        for (int layer : layers) {
            double t = field.t_of_layer(layer);
            double gam = gamma(problem, 0.0, t);
            double d = sup_abs_layer(field, layer);
            double margin = gam * d - std::exp(-report.rho0 * t) * bounds.M1_inf;
            worst = std::max(worst, margin);
            detail += (detail.empty() ? "" : "; ") + ("t=" + fmt(t) + ": " + fmt(gam * d));
        }
        r.measured = worst;
        r.bound = 0.0;
        r.slack = scheme_slack;
        r.pass = r.measured <= r.bound + r.slack;
        r.detail = detail;
        out.push_back(std::move(r));
    }

    if (report.beta2 == 0.0) {
        CheckReport r;
        r.name = "undiscounted-decay";
        r.inequality = "sup_x |W(t,.)| <= int_t^inf beta1 + slack (beta2 = 0)";
        VarLayout layout = problem.layout();
        std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
        auto beta1_abs = [&](double s) {
            slots[0] = s;
            return std::fabs(problem.beta1.eval(layout, slots));
        };
        double worst = -std::numeric_limits<double>::infinity();
        std::string detail;
        for (int layer : layers) {
            double t = field.t_of_layer(layer);
            double tail = integrate(beta1_abs, t, quad_window, 1e-10) +
                          problem.beta1_tail_coeff / problem.beta1_tail_rate *
                              std::exp(-problem.beta1_tail_rate * quad_window);
            double d = sup_abs_layer(field, layer);
            worst = std::max(worst, d - tail);
            detail += (detail.empty() ? "" : "; ") +
                      ("t=" + fmt(t) + ": " + fmt(d) + " vs " + fmt(tail));
        }
        r.measured = worst;
        r.bound = 0.0;
        r.slack = scheme_slack;
        r.pass = r.measured <= r.bound + r.slack;
        r.detail = detail;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CheckReport> check_stationarity(const ValueField& field,
                                            const ValueField& stationary_field, double tol,
                                            double scheme_slack) {
    std::vector<CheckReport> out;
    std::size_t npts = field.num_points();
    {
        CheckReport r;
        r.name = "stationarity-in-t";
        r.inequality = "max_{t,x} |W(t,x) - W(0,x)| <= 2 (tol + scheme slack)";
        double worst = 0.0;
        for (int layer = 1; layer < field.layers; ++layer) {
            const double* a = field.values.data() + static_cast<std::size_t>(layer) * npts;
            for (std::size_t pt = 0; pt < npts; ++pt)
                worst = std::max(worst, std::fabs(a[pt] - field.values[pt]));
        }
        r.measured = worst;
        r.bound = 0.0;
        r.slack = 2.0 * (tol + scheme_slack);
        r.pass = r.measured <= r.bound + r.slack;
        out.push_back(std::move(r));
    }
    {
        CheckReport r;
        r.name = "stationary-match";
        r.inequality = "max_x |W(0,x) - w(x)| <= 2 (tol + scheme slack)";
        double worst = 0.0;
        for (std::size_t pt = 0; pt < npts; ++pt)
            worst = std::max(worst, std::fabs(field.values[pt] - stationary_field.values[pt]));
        r.measured = worst;
        r.bound = 0.0;
        r.slack = 2.0 * (tol + scheme_slack);
        r.pass = r.measured <= r.bound + r.slack;
        out.push_back(std::move(r));
    }
    return out;
}

CheckReport check_isaacs_value(const ValueField& lower, const ValueField& upper,
                               const GapScan& gap_scan, double scheme_slack) {
    CheckReport r;
    if (gap_scan.max_gap <= 1e-10) {
        r.name = "isaacs-value";
        r.inequality = "Hamiltonian gap 0 => max |lower - upper| <= 2 scheme slack";
        double worst = 0.0;
        for (std::size_t i = 0; i < lower.values.size(); ++i)
            worst = std::max(worst, std::fabs(lower.values[i] - upper.values[i]));
        r.measured = worst;
        r.bound = 0.0;
        r.slack = 2.0 * scheme_slack;
        r.pass = r.measured <= r.bound + r.slack;
        r.detail = "scanned gap " + fmt(gap_scan.max_gap);
    } else {
        r.name = "isaacs-gap";
        r.inequality = "informational: the scanned Hamiltonian gap is nonzero";
        r.measured = gap_scan.max_gap;
        r.bound = 0.0;
        r.slack = 0.0;
        r.pass = true;
        r.informational = true;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "max gap %.6g at t=%.4g", gap_scan.max_gap, gap_scan.t);
        r.detail = buf;
    }
    return r;
}

CheckReport cross_validate(const ValueField& field, const BsdeEstimate& mc,
                           const std::vector<double>& x0, double scheme_slack) {
    CheckReport r;
    r.name = "pde-mc-cross-validation";
    r.inequality = "|W(t0,x0) - Y_0| <= 3 SE + scheme slack";
    int layer = field.layer_of_t(mc.t0);
    double w = field.interpolate(layer, x0);
    r.measured = std::fabs(w - mc.y0);
    r.bound = 0.0;
    r.slack = 3.0 * mc.se + scheme_slack;
    r.pass = r.measured <= r.bound + r.slack;
    r.detail = "W = " + fmt(w) + ", Y0 = " + fmt(mc.y0) + ", SE = " + fmt(mc.se);
    return r;
}

bool all_passed(const std::vector<CheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.informational && !r.skipped && !r.pass) return false;
    return true;
}

} // namespace isaacs
