#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <utility>

#include "lamperti/errors.hpp"

namespace lamperti {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadSpec {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_depth = 44;
};

namespace detail {

template <class T, class F>
T adapt_simpson(F& f, double a, double m, double b, T fa, T fm, T fb, T whole,
                double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const T flm = f(lm);
    const T frm = f(rm);
    const T left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const T right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const T delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adapt_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on a finite interval. Works for real and complex integrands.
template <class F>
auto integrate(F&& f, double a, double b, QuadSpec spec = {}) {
    using T = decltype(f(a));
    if (!(a <= b)) throw domain_error("integrate: interval endpoints out of order");
    if (a == b) return T{};
    const double m = 0.5 * (a + b);
    T fa = f(a), fm = f(m), fb = f(b);
    const T whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(whole));
    return detail::adapt_simpson(f, a, m, b, fa, fm, fb, whole, tol, spec.max_depth);
}

enum class TailStatus { converged, divergent, inconclusive };

struct TailIntegral {
    double value = 0.0;
    TailStatus status = TailStatus::inconclusive;
    double tail_bound = 0.0;  // bound on the discarded mass when converged
};

// \int_a^\infty f by geometrically growing panels. A sound decision procedure
// for convergence does not exist, so the outcome is a tri-state: panels that
// shrink below tolerance twice in a row -> converged; panels that grow (or a
// total that keeps drifting up) past the budget -> divergent; else inconclusive.
template <class F>
TailIntegral integrate_to_inf(F&& f, double a, QuadSpec spec = {}, double h0 = 1.0,
                              int max_panels = 120) {
    TailIntegral out;
    double lo = a;
    double h = h0;
    double total = 0.0;
    double prev_panel = std::numeric_limits<double>::infinity();
    int small_streak = 0;
    int grow_streak = 0;
    for (int k = 0; k < max_panels; ++k) {
        const double panel = integrate(f, lo, lo + h, spec);
        total += panel;
        const double floor = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
        if (std::abs(panel) <= floor) {
            if (++small_streak >= 2) {
                out.value = total;
                out.status = TailStatus::converged;
                out.tail_bound = 2.0 * std::abs(panel) + floor;
                return out;
            }
        } else {
            small_streak = 0;
        }
        grow_streak = (std::abs(panel) >= std::abs(prev_panel)) ? grow_streak + 1 : 0;
        if (grow_streak >= 8 || !std::isfinite(total)) {
            out.value = total;
            out.status = TailStatus::divergent;
            return out;
        }
        prev_panel = panel;
        lo += h;
        h *= 1.6;
    }
    out.value = total;
    out.status = TailStatus::inconclusive;
    return out;
}

// e^{-u} - 1 + u without cancellation for small |u|.
inline double exp_compensated(double u) {
    if (std::abs(u) > 1e-3) return std::expm1(-u) + u;
    const double u2 = u * u;
    return u2 * (0.5 - u / 6.0 + u2 / 24.0 - u2 * u / 120.0);
}

// (e^{-u} - 1 + u) / u, stable at u = 0.
inline double exp_compensated_over(double u) {
    if (std::abs(u) > 1e-3) return (std::expm1(-u) + u) / u;
    const double u2 = u * u;
    return u * (0.5 - u / 6.0 + u2 / 24.0 - u2 * u / 120.0);
}

// (e^{-u} - 1) / u, stable at u = 0.
inline double expm1_over(double u) {
    if (std::abs(u) > 1e-5) return std::expm1(-u) / u;
    return -1.0 + u * (0.5 - u / 6.0);
}

}  // namespace lamperti
