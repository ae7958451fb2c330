#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "lamperti/errors.hpp"

namespace lamperti {

struct RootSpec {
    double x_tol = 1e-14;   // relative on the abscissa
    int max_iter = 200;
};

// Root of f on [lo, hi] with f(lo), f(hi) of opposite sign (or zero).
// Secant steps guarded by bisection; monotone convergence is not assumed.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, RootSpec spec = {}) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw numeric_error("solve_bracketed: no sign change on [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "], f = " + std::to_string(flo) +
                            ", " + std::to_string(fhi));
    for (int it = 0; it < spec.max_iter; ++it) {
        double mid;
        // secant proposal, clipped inside the bracket
        const double sec = (lo * fhi - hi * flo) / (fhi - flo);
        if (sec > lo && sec < hi)
            mid = sec;
        else
            mid = 0.5 * (lo + hi);
        // alternate with bisection when the bracket stops shrinking fast
        if (it % 2 == 1) mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || hi - lo <= spec.x_tol * (1.0 + std::abs(mid))) return mid;
        if ((fm > 0) == (fhi > 0)) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace lamperti
