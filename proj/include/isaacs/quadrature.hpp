#pragma once

#include <cmath>
#include <functional>

#include "isaacs/errors.hpp"

namespace isaacs {

/// Adaptive Simpson quadrature with an absolute tolerance.
/// Throws QuadratureError if the recursion depth limit is exceeded before
/// the tolerance is met (e.g. for integrands that are effectively singular).
template <class F>
double integrate(const F& f, double a, double b, double abs_tol, int max_depth = 48) {
    if (a == b) return 0.0;

    struct Rec {
        const F& f;
        int max_depth;

        double simpson(double lo, double hi, double flo, double fmid, double fhi) const {
            return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        }

        double run(double lo, double hi, double flo, double fmid, double fhi, double whole,
                   double tol, int depth) const {
            double mid = 0.5 * (lo + hi);
            double fl = f(0.5 * (lo + mid));
            double fr = f(0.5 * (mid + hi));
            double left = simpson(lo, mid, flo, fl, fmid);
            double right = simpson(mid, hi, fmid, fr, fhi);
            double err = left + right - whole;
            if (std::fabs(err) <= 15.0 * tol)
                return left + right + err / 15.0;
            if (depth >= max_depth)
                throw QuadratureError("adaptive quadrature failed to converge");
            return run(lo, mid, flo, fl, fmid, left, 0.5 * tol, depth + 1) +
                   run(mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth + 1);
        }
    };

    double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
    Rec rec{f, max_depth};
    double whole = rec.simpson(a, b, fa, fm, fb);
    return rec.run(a, b, fa, fm, fb, whole, abs_tol, 0);
}

} // namespace isaacs
