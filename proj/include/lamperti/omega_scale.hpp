#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lamperti/errors.hpp"
#include "lamperti/quadrature.hpp"
#include "lamperti/rate_function.hpp"
#include "lamperti/scale_functions.hpp"

namespace lamperti {

// ---------------------------------------------------------------------------
// Condition checks H0, H1 and the H2 index, decided from endpoint exponents
// where the variant metadata allows and numerically (tri-state) otherwise.
// ---------------------------------------------------------------------------

struct ConditionReport {
    TriState h0 = TriState::inconclusive;
    TriState h1 = TriState::inconclusive;
    std::optional<double> lambda;
    double lambda_spread = 0.0;
    bool lambda_exact = false;
    std::string notes;
};

namespace detail {

// Convergence of int_{0+} x^{w_exp} / R(x) dx from the endpoint exponents;
// falls back to a shrinking-window numeric trend when the exponent is unknown.
inline TriState near_zero_integral(const RateFunction& rate, double w_exp) {
    if (auto e0 = rate.exponent_at_zero()) {
        const double integrand_exp = w_exp - *e0;
        if (integrand_exp > -1.0 + 1e-12) return TriState::yes;
        if (integrand_exp < -1.0 - 1e-12) return TriState::no;
        return TriState::inconclusive;  // exactly the critical exponent
    }
    // numeric trend on dyadic windows (delta, 2 delta)
    double prev = kInf;
    int shrink_ok = 0;
    for (double d = 1e-2; d > 1e-9; d *= 0.25) {
        const double piece =
            integrate([&](double x) { return std::pow(x, w_exp) * rate.omega(x); }, d, 2.0 * d);
        if (piece < 0.25 * prev) ++shrink_ok;
        if (piece > prev) return TriState::no;  // windows growing toward 0
        prev = piece;
    }
    return shrink_ok >= 4 ? TriState::yes : TriState::inconclusive;
}

inline TriState from_tail(const TailIntegral& t) {
    switch (t.status) {
        case TailStatus::converged: return TriState::yes;
        case TailStatus::divergent: return TriState::no;
        default: return TriState::inconclusive;
    }
}

}  // namespace detail

inline ConditionReport check_h0_h1_h2(const LevyModel& model, const RateFunction& rate) {
    ConditionReport rep;
    rep.h0 = detail::from_tail(rate.inv_tail(1.0));

    // H1 = int_{0+}^inf W_p / R. Near 0 the scale function carries exponent 1
    // (sigma > 0) or 0 (bounded variation, W(0+) > 0).
    const double w_exp = model.bounded_variation() ? 0.0 : 1.0;
    const TriState near0 = detail::near_zero_integral(rate, w_exp);
    TriState tail;
    if (model.p() > 0 || model.gamma() < 0) {
        tail = rep.h0;  // W_p is bounded, so the tail matches H0
    } else if (rep.h0 == TriState::no) {
        tail = TriState::no;  // W_p >= W_p(1) > 0 bounds the integrand below
    } else if (model.gamma() == 0.0) {
        // oscillating case: W grows linearly, compare against x/R
        if (auto ei = rate.exponent_at_inf()) {
            tail = (*ei > 2.0) ? TriState::yes : (*ei < 2.0 ? TriState::no : TriState::inconclusive);
        } else {
            tail = rate.exponential_tail() ? TriState::yes : TriState::inconclusive;
        }
    } else {
        tail = TriState::inconclusive;
    }
    if (near0 == TriState::no || tail == TriState::no)
        rep.h1 = TriState::no;
    else if (near0 == TriState::yes && tail == TriState::yes)
        rep.h1 = TriState::yes;
    else
        rep.h1 = TriState::inconclusive;

    if (rep.h0 == TriState::yes && std::isfinite(model.gamma()) && model.gamma() > 0) {
        const LambdaEstimate le = estimate_h2_lambda(rate, model.gamma());
        rep.lambda = le.value;
        rep.lambda_spread = le.spread;
        rep.lambda_exact = le.exact;
        if (!le.value) rep.notes = "lambda estimate did not settle";
    } else if (auto ex = rate.lambda_exact()) {
        rep.lambda = ex;  // read-off still available without H0/gamma
        rep.lambda_exact = true;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Extinction / explosion integral tests: extinction has positive probability
// iff int_{0+} W/R < inf; explosion (given p, gamma in (0, inf)) iff
// int^inf 1/R < inf.
// ---------------------------------------------------------------------------

struct BoundaryClassification {
    TriState extinction = TriState::inconclusive;
    TriState explosion = TriState::inconclusive;
    std::string basis;
};

inline BoundaryClassification classify_boundaries(const LevyModel& model,
                                                  const RateFunction& rate) {
    BoundaryClassification out;
    const double w_exp = model.bounded_variation() ? 0.0 : 1.0;
    out.extinction = detail::near_zero_integral(rate, w_exp);
    std::string basis = std::string("extinction: int_{0+} W/R with W ~ x^") +
                        (model.bounded_variation() ? "0" : "1") + " near 0";
    if (!(model.p() > 0)) {
        out.explosion = TriState::no;
        basis += "; explosion: p = 0, tau_0^- < inf a.s.";
    } else if (!std::isfinite(model.gamma())) {
        out.explosion = TriState::inconclusive;
        basis += "; explosion: integral test needs gamma < inf";
    } else {
        out.explosion = detail::from_tail(rate.inv_tail(1.0));
        basis += "; explosion: integral test on int^inf dz/R";
    }
    out.basis = basis;
    return out;
}

// ---------------------------------------------------------------------------
// W^(omega): forward-marching product-trapezoid solution of
//   W^(w)(x, y) = W(x-y) + int_y^x W(x-z) w(z) W^(w)(z, y) dz
// on a shared uniform grid (so every W(x-z) sits on a cached offset).
// ---------------------------------------------------------------------------

struct OmegaGrid {
    double y_lo = 0.0;
    double x_max = 10.0;
    int n = 801;  // nodes including both endpoints
};

class OmegaScaleTable {
public:
    OmegaScaleTable(std::vector<double> grid, std::vector<std::vector<double>> cols,
                    std::shared_ptr<const ScaleFunction> w, double w0)
        : grid_(std::move(grid)), cols_(std::move(cols)), w_(std::move(w)), w0_(w0) {}

    const std::vector<double>& grid() const { return grid_; }
    double x_max() const { return grid_.back(); }
    double step() const { return grid_[1] - grid_[0]; }

    // W^(omega)(x_i, y_j) for j <= i; the diagonal is W(0).
    double at(std::size_t i, std::size_t j) const {
        if (j > i) return w0_;
        return cols_[j][i - j];
    }

    // bilinear interpolation inside the covered triangle
    double value(double x, double y) const {
        if (!(y <= x) || y < grid_.front() - 1e-12 || x > grid_.back() + 1e-12)
            throw domain_error("OmegaScaleTable::value outside the grid triangle");
        const double h = step();
        const double fy = std::clamp((y - grid_.front()) / h, 0.0, double(grid_.size() - 1));
        const double fx = std::clamp((x - grid_.front()) / h, 0.0, double(grid_.size() - 1));
        const auto j = std::min(static_cast<std::size_t>(fy), grid_.size() - 2);
        const auto i = std::min(static_cast<std::size_t>(fx), grid_.size() - 2);
        const double ty = fy - static_cast<double>(j);
        const double tx = fx - static_cast<double>(i);
        const double v00 = at(i, j), v10 = at(i + 1, j);
        const double v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
        return (1 - tx) * ((1 - ty) * v00 + ty * v01) + tx * ((1 - ty) * v10 + ty * v11);
    }

    // H^(omega) column, present when computed alongside the table.
    bool has_h() const { return !h_.empty(); }
    const std::vector<double>& h_nodes() const { return h_; }
    double h_tail_bound() const { return h_tail_bound_; }

    double h_value(double y) const {
        if (h_.empty()) throw domain_error("H^(omega) not computed for this table");
        if (y < grid_.front() - 1e-12 || y > grid_.back() + 1e-12)
            throw domain_error("h_value outside the grid");
        const double h = step();
        const double f = std::clamp((y - grid_.front()) / h, 0.0, double(grid_.size() - 1));
        const auto j = std::min(static_cast<std::size_t>(f), grid_.size() - 2);
        const double t = f - static_cast<double>(j);
        // log-linear: H is positive and close to exponential in y
        return std::exp((1 - t) * std::log(h_[j]) + t * std::log(h_[j + 1]));
    }

    void set_h(std::vector<double> h, double tail_bound) {
        h_ = std::move(h);
        h_tail_bound_ = tail_bound;
    }

    const ScaleFunction& scale() const { return *w_; }

private:
    std::vector<double> grid_;
    std::vector<std::vector<double>> cols_;  // cols_[j][i-j] = W^(w)(x_i, y_j)
    std::shared_ptr<const ScaleFunction> w_;
    double w0_;
    std::vector<double> h_;
    double h_tail_bound_ = kInf;
};

inline OmegaScaleTable solve_w_omega(const ScaleTable& w0_table, const RateFunction& rate,
                                     const OmegaGrid& g) {
    if (w0_table.q != 0.0) throw domain_error("solve_w_omega: scale table must be at q = 0");
    if (!(g.n >= 3) || !(g.x_max > g.y_lo) || !(g.y_lo >= 0))
        throw domain_error("solve_w_omega: bad grid");
    const auto n = static_cast<std::size_t>(g.n);
    const double h = (g.x_max - g.y_lo) / static_cast<double>(g.n - 1);
    std::vector<double> grid(n), om(n), wdiff(n);
    const ScaleFunction& W = *w0_table.fn;
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = g.y_lo + h * static_cast<double>(k);
        wdiff[k] = W.value(h * static_cast<double>(k));
        double r = 0.0;
        try {
            r = rate(grid[k]);
        } catch (const domain_error&) {
            r = 0.0;
        }
        if (!(r > 0))
            throw domain_error("solve_w_omega: omega singular at grid node x=" +
                               std::to_string(grid[k]));
        om[k] = 1.0 / r;  // 0 for R = inf is fine
    }
    const double w0 = wdiff[0];
    std::vector<std::vector<double>> cols(n);
    // marching is sequential in x within a column; columns are independent
    auto solve_column = [&](std::size_t j) {
        auto& col = cols[j];
        col.resize(n - j);
        col[0] = w0;
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = 0.5 * om[j] * wdiff[i - j] * col[0];
            for (std::size_t k = j + 1; k < i; ++k)
                acc += om[k] * wdiff[i - k] * col[k - j];
            const double denom = 1.0 - 0.5 * h * om[i] * w0;
            if (!(denom > 0.1))
                throw numeric_error("solve_w_omega: step too large for the diagonal kernel");
            col[i - j] = (wdiff[i - j] + h * acc) / denom;
        }
    };
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(hw ? hw : 1, n / 64));
    if (workers <= 1) {
        for (std::size_t j = 0; j < n; ++j) solve_column(j);
    } else {
        // interleave columns so workers share the long (small j) ones
        std::vector<std::future<void>> futs;
        for (std::size_t w = 0; w < workers; ++w)
            futs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t j = w; j < n; j += workers) solve_column(j);
            }));
        for (auto& f : futs) f.get();
    }
    return OmegaScaleTable(std::move(grid), std::move(cols), w0_table.fn, w0);
}

// ---------------------------------------------------------------------------
// H^(omega)(y) = e^{-py} + int_y^inf e^{-pz} w(z) W^(w)(z, y) dz, truncated at
// x_max. The integrability gate is int_1^inf w W_p < inf (necessary and
// sufficient for a locally bounded H of this form);
// the discarded tail is bounded by the Gronwall-type envelope
//   exp(int_y^inf w W_p) * W_p(inf) * int_{x_max}^inf w.
// ---------------------------------------------------------------------------

struct HOptions {
    double tail_tol = 1e-6;  // required bound on the truncated tail
};

inline void attach_h_omega(OmegaScaleTable& table, const RateFunction& rate,
                           HOptions opt = {}) {
    const ScaleFunction& W = table.scale();
    const LevyModel& model = W.model();
    const double p = model.p();
    auto omwp = [&](double z) { return rate.omega(z) * W.tilted(z); };
    const TailIntegral crit = integrate_to_inf(omwp, 1.0);
    if (crit.status != TailStatus::converged)
        throw precondition_error("omega-Wp tail",
                                 "int_1^inf omega(z) W_p(z) dz did not converge; H^(omega) "
                                 "has no locally bounded solution of this form");
    const auto& grid = table.grid();
    const double y_lo = grid.front();
    const double head = y_lo < 1.0 ? integrate(omwp, std::max(y_lo, 1e-12), 1.0) : 0.0;
    const double envelope = std::exp(head + crit.value);
    const TailIntegral om_tail = rate.inv_tail(table.x_max());
    const double wp_inf = W.tilted_limit();
    const double tail_bound =
        envelope * (std::isfinite(wp_inf) ? wp_inf : W.tilted(table.x_max())) *
        (om_tail.status == TailStatus::converged ? om_tail.value : kInf);
    if (!(tail_bound <= opt.tail_tol) || !(std::exp(-p * table.x_max()) <= opt.tail_tol))
        throw precondition_error(
            "H truncation",
            "x_max too small: recorded tail bound " + std::to_string(tail_bound) +
                " / e^{-p x_max} exceeds the requested tolerance");
    const auto n = grid.size();
    const double h = table.step();
    std::vector<double> hv(n);
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = std::exp(-p * grid[k]) * rate.omega(grid[k]);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            const double w = (i == j || i == n - 1) ? 0.5 : 1.0;
            acc += w * f[i] * table.at(i, j);
        }
        hv[j] = std::exp(-p * grid[j]) + h * acc;
        if (!(hv[j] > 0) || !std::isfinite(hv[j]))
            throw numeric_error("H^(omega) non-positive at y=" + std::to_string(grid[j]));
    }
    table.set_h(std::move(hv), tail_bound);
}

// ---------------------------------------------------------------------------
// Exit identities
// ---------------------------------------------------------------------------

// E_x(e^{-eta(tau_c^-)}; tau_c^- < tau_b^+) = W^(w)(b, x) / W^(w)(b, c).
inline double weighted_exit(const OmegaScaleTable& table, double x, double c, double b) {
    if (x == c) return 1.0;  // starting at the lower boundary
    if (!(c < x && x < b)) throw domain_error("weighted_exit: need c <= x < b");
    return table.value(b, x) / table.value(b, c);
}

// E_x(e^{-T_c^-}; T_c^- < inf) = H^(w)(x) / H^(w)(c).
struct DownwardLaplaceOptions {
    double x_max = 25.0;
    int n = 1601;
    HOptions h;
};

inline double downward_laplace(const LevyModel& model, const RateFunction& rate, double x,
                               double c, DownwardLaplaceOptions opt = {},
                               ScaleOptions scale_opt = {}) {
    if (x == c && c > 0) return 1.0;  // starting at the boundary
    if (!(x > c) || !(c >= 0)) throw domain_error("downward_laplace: need x > c >= 0");
    if (c == 0.0) {
        const ConditionReport rep = check_h0_h1_h2(model, rate);
        if (rep.h1 != TriState::yes)
            throw precondition_error("H1",
                                     "the c = 0 endpoint requires H1; status: " +
                                         std::string(to_string(rep.h1)));
    }
    double y_lo = c;
    if (c == 0.0) {
        // omega may blow up at 0 for power rates with c = 0
        const auto e0 = rate.exponent_at_zero();
        if (e0 && *e0 > 0.0) y_lo = 1e-6;
    }
    GridSpec gs;
    gs.kind = GridSpec::Kind::uniform;
    gs.lo = 1e-3;
    gs.hi = opt.x_max;
    gs.n = 64;  // snapshot only; the evaluator drives the Volterra solve
    ScaleOptions so = scale_opt;
    so.cache_hi = std::max(so.cache_hi, opt.x_max + 1.0);
    ScaleTable w0 = compute_scale(model, 0.0, gs, so);
    OmegaGrid og;
    og.y_lo = y_lo;
    og.x_max = opt.x_max;
    og.n = opt.n;
    OmegaScaleTable t = solve_w_omega(w0, rate, og);
    attach_h_omega(t, rate, opt.h);
    const double hx = t.h_value(std::max(x, y_lo));
    const double hc = t.h_value(std::max(c, y_lo));
    return std::min(hx / hc, 1.0);
}

}  // namespace lamperti
