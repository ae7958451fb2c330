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
#include "lamperti/interp.hpp"
#include "lamperti/laplace_inversion.hpp"
#include "lamperti/levy_model.hpp"
#include "lamperti/quadrature.hpp"

namespace lamperti {

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

struct GridSpec {
    enum class Kind { uniform, geometric };
    Kind kind = Kind::geometric;
    double lo = 1e-3;
    double hi = 50.0;
    int n = 400;

    // Scale-function grids always carry the x0 = 0 node.
    std::vector<double> nodes() const {
        if (!(lo > 0 && hi > lo && n >= 2)) throw domain_error("GridSpec: need 0 < lo < hi, n >= 2");
        std::vector<double> x;
        x.reserve(static_cast<std::size_t>(n) + 1);
        x.push_back(0.0);
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / (n - 1);
            x.push_back(kind == Kind::uniform ? lo + (hi - lo) * t
                                              : lo * std::pow(hi / lo, t));
        }
        return x;
    }
};

// ---------------------------------------------------------------------------
// ScaleFunction: evaluator for W^{(q)}.
//
// Closed form for the registered Brownian-with-drift family (and the pure
// downward drift). Everything else goes through Euler inversion of the tilted
// transform 1/psi_{Phi(q)}(s), whose target W_{Phi(q)} is bounded and monotone;
// W^{(q)}(x) = e^{Phi(q) x} W_{Phi(q)}(x) is then exact in the exponential factor.
// ---------------------------------------------------------------------------

enum class ScaleMethod { automatic, closed_form, inversion };

struct ScaleOptions {
    ScaleMethod method = ScaleMethod::automatic;
    int euler_m = 32;          // inversion node count (2m+1 transform evals)
    double cache_hi = 60.0;    // tilted values cached on [0, cache_hi]
    double fine_step = 0.0025; // node spacing on [0, fine_hi]
    double fine_hi = 2.0;
    double coarse_step = 0.01;
    bool node_errors = true;   // per-node estimate by order halving
};

class ScaleFunction {
public:
    ScaleFunction(LevyModel model, double q, ScaleOptions opt = {})
        : model_(std::move(model)), q_(q), opt_(opt) {
        if (q_ < 0) throw domain_error("scale function: q must be >= 0");
        if (model_.bounded_variation() && model_.mu_eff() >= 0)
            throw unsupported_model_error(
                "scale function undefined: bounded-variation path is monotone "
                "(subordinator), tau_c^- never happens");
        alpha_ = model_.phi(q_);
        tilted_limit_ = model_.phi_prime(q_);
        w0_ = model_.bounded_variation() ? 1.0 / (-model_.mu_eff()) : 0.0;
        const bool want_closed = opt_.method != ScaleMethod::inversion && !model_.has_jumps();
        if (opt_.method == ScaleMethod::closed_form && model_.has_jumps())
            throw unsupported_model_error("no registered closed form for jump models");
        closed_ = want_closed;
        if (closed_)
            init_closed();
        else
            init_inversion();
    }

    const LevyModel& model() const { return model_; }
    double q() const { return q_; }
    bool closed_form() const { return closed_; }
    double alpha() const { return alpha_; }          // Phi(q)
    double w0() const { return w0_; }                // W^{(q)}(0+)
    double tilted_limit() const { return tilted_limit_; }
    double max_node_error() const { return max_node_error_; }

    // W^{(q)}(x); 0 for x < 0 by convention.
    double value(double x) const {
        if (x < 0) return 0.0;
        return std::exp(alpha_ * x) * tilted(x);
    }

    // e^{-Phi(q) x} W^{(q)}(x), the bounded monotone version.
    double tilted(double x) const {
        if (x < 0) return 0.0;
        if (closed_) return tilted_closed(x);
        if (x <= opt_.fine_hi) return fine_(x);
        if (x <= opt_.cache_hi) return coarse_(x);
        // beyond the cache: exponential approach to the limit
        const double gap_end = std::max(tilted_limit_ - coarse_.nodes().back(), 0.0);
        if (!std::isfinite(tilted_limit_) || gap_end == 0.0 || !std::isfinite(tail_kappa_))
            return coarse_.nodes().back();
        return tilted_limit_ - gap_end * std::exp(-tail_kappa_ * (x - opt_.cache_hi));
    }

    // Inversion error estimate near x (0 for closed forms).
    double error_estimate(double x) const {
        if (closed_ || node_err_.empty()) return 0.0;
        const double h = opt_.fine_step;
        if (x <= opt_.fine_hi) {
            auto i = static_cast<std::size_t>(std::clamp(x / h, 0.0, double(n_fine_ - 1)));
            return node_err_[i];
        }
        auto i = static_cast<std::size_t>(
            std::clamp((x - opt_.fine_hi) / opt_.coarse_step, 0.0, double(node_err_.size() - n_fine_ - 1)));
        return node_err_[n_fine_ + i];
    }

    // Resolvent density u(x,y) = e^{-px} W(y) - W(y-x), for tables at q = 0.
    // Evaluated in the tilted variables to keep the cancellation under control;
    // exact factorization for the closed-form family.
    double resolvent(double x, double y) const {
        if (q_ != 0.0) throw domain_error("resolvent: table must be at q = 0");
        if (!(x > 0 && y > 0)) throw domain_error("resolvent: x, y must be > 0");
        const double p = model_.p();
        double raw;
        if (closed_) {
            if (model_.sigma2_total() == 0.0) {
                // pure downward drift: W is constant 1/|mu|, p = 0
                return (y <= x) ? coef_ : 0.0;
            }
            const double delta = splus_ - sminus_;
            if (delta == 0.0) {
                // psi has a double root at 0 (q=0, mu=0): W(x) = 2x/sigma^2
                raw = (y <= x) ? coef_ * y : coef_ * x;
            } else if (y <= x) {
                raw = coef_ / delta * std::exp(splus_ * (y - x)) * (-std::expm1(-delta * y));
            } else {
                raw = coef_ / delta * std::exp(sminus_ * (y - x)) * (-std::expm1(-delta * x));
            }
            return std::max(raw, 0.0);
        }
        if (y <= x) {
            raw = std::exp(p * (y - x)) * tilted(y);
        } else {
            raw = std::exp(p * (y - x)) * (tilted(y) - tilted(y - x));
        }
        const double amp = std::exp(p * std::max(y - x, 0.0));
        const double tol = 1e-9 * std::max(1.0, amp * (max_node_error_ + 1e-12) * 1e9);
        if (raw < -tol)
            throw numeric_error("resolvent density negative beyond tolerance at (x,y)=(" +
                                std::to_string(x) + "," + std::to_string(y) + ")");
        const double cap = std::isfinite(tilted_limit_) ? tilted(y) : raw;
        return std::clamp(raw, 0.0, std::max(cap, 0.0));
    }

private:
    void init_closed() {
        const double s2 = model_.sigma2_total();
        const double mu = model_.mu();
        if (s2 > 0) {
            const double disc = std::sqrt(mu * mu + 2.0 * s2 * q_);
            splus_ = (mu + disc) / s2;
            sminus_ = (mu - disc) / s2;
            coef_ = 2.0 / s2;
        } else {
            // pure drift mu < 0: W^{(q)}(x) = e^{q x/|mu|} / |mu|
            splus_ = q_ / (-mu);
            sminus_ = splus_;
            coef_ = 1.0 / (-mu);
        }
    }

    double tilted_closed(double x) const {
        if (model_.sigma2_total() == 0.0) return coef_;  // pure drift
        const double delta = splus_ - sminus_;
        if (delta == 0.0) return coef_ * x;
        return coef_ / delta * (-std::expm1(-delta * x));
    }

    void init_inversion() {
        EulerInverter inv(opt_.euler_m);
        EulerInverter inv_half(std::max(4, opt_.euler_m / 2));
        auto transform = [&](std::complex<double> s) {
            return 1.0 / (model_.psi(s + alpha_) - q_);
        };
        // pure per-node work, split across workers
        auto fill = [&](double x0, double h, std::size_t n, std::vector<double>& y,
                        std::vector<double>& err) {
            y.resize(n);
            err.resize(n);
            auto worker = [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    const double x = x0 + h * static_cast<double>(i);
                    if (x == 0.0) {
                        y[i] = w0_;
                        err[i] = 0.0;
                        continue;
                    }
                    y[i] = inv.invert(transform, x);
                    err[i] = opt_.node_errors
                                 ? std::abs(y[i] - inv_half.invert(transform, x))
                                 : 0.0;
                }
            };
            const unsigned hw = std::thread::hardware_concurrency();
            const std::size_t workers =
                std::max<std::size_t>(1, std::min<std::size_t>(hw ? hw : 1, n / 256));
            if (workers <= 1) {
                worker(0, n);
            } else {
                std::vector<std::future<void>> futs;
                const std::size_t chunk = (n + workers - 1) / workers;
                for (std::size_t k = 0; k < workers; ++k) {
                    const std::size_t lo = k * chunk;
                    if (lo >= n) break;
                    futs.push_back(std::async(std::launch::async, worker, lo,
                                              std::min(n, lo + chunk)));
                }
                for (auto& f : futs) f.get();
            }
        };
        n_fine_ = static_cast<std::size_t>(std::lround(opt_.fine_hi / opt_.fine_step)) + 1;
        const auto n_coarse = static_cast<std::size_t>(
                                  std::lround((opt_.cache_hi - opt_.fine_hi) / opt_.coarse_step)) +
                              1;
        std::vector<double> yf, yc, ef, ec;
        fill(0.0, opt_.fine_step, n_fine_, yf, ef);
        fill(opt_.fine_hi, opt_.coarse_step, n_coarse, yc, ec);
        node_err_ = std::move(ef);
        node_err_.insert(node_err_.end(), ec.begin(), ec.end());
        max_node_error_ = 0.0;
        for (double e : node_err_) max_node_error_ = std::max(max_node_error_, e);
        // enforce monotonicity; a violation beyond the error estimates means the
        // inversion did not converge, and the worst node is reported
        auto monotonize = [&](std::vector<double>& y, const char* which) {
            for (std::size_t i = 1; i < y.size(); ++i) {
                if (y[i] < y[i - 1]) {
                    if (y[i - 1] - y[i] > 100.0 * (max_node_error_ + 1e-13))
                        throw numeric_error(std::string("scale inversion non-monotone in the ") +
                                            which + " cache near node " + std::to_string(i) +
                                            " (drop " + std::to_string(y[i - 1] - y[i]) + ")");
                    y[i] = y[i - 1];
                }
            }
        };
        monotonize(yf, "fine");
        yc.front() = std::max(yc.front(), yf.back());
        monotonize(yc, "coarse");
        fine_ = UniformCubic(0.0, opt_.fine_step, std::move(yf));
        coarse_ = UniformCubic(opt_.fine_hi, opt_.coarse_step, yc);
        // tail decay rate fitted on the last nodes
        tail_kappa_ = kInf;
        if (std::isfinite(tilted_limit_)) {
            const auto& y = coarse_.nodes();
            const double g1 = tilted_limit_ - y[y.size() - 2];
            const double g2 = tilted_limit_ - y[y.size() - 1];
            if (g1 > 0 && g2 > 0 && g2 < g1)
                tail_kappa_ = std::log(g1 / g2) / opt_.coarse_step;
        }
    }

    LevyModel model_;
    double q_ = 0.0;
    ScaleOptions opt_;
    double alpha_ = 0.0;
    double tilted_limit_ = kInf;
    double w0_ = 0.0;
    bool closed_ = false;
    // closed-form parameters
    double splus_ = 0.0, sminus_ = 0.0, coef_ = 0.0;
    // inversion caches
    UniformCubic fine_, coarse_;
    std::vector<double> node_err_;
    std::size_t n_fine_ = 0;
    double max_node_error_ = 0.0;
    double tail_kappa_ = kInf;
};

// ---------------------------------------------------------------------------
// ScaleTable: grid snapshot of W^{(q)} plus the evaluator that produced it.
// ---------------------------------------------------------------------------

struct ScaleTable {
    double q = 0.0;
    std::vector<double> x;         // x0 = 0 < x1 < ...
    std::vector<double> w;         // W^{(q)}(x_i)
    std::vector<double> w_tilted;  // e^{-Phi(q) x_i} W^{(q)}(x_i)
    std::vector<double> err;       // inversion error estimates
    std::string fingerprint;
    std::shared_ptr<const ScaleFunction> fn;

    const LevyModel& model() const { return fn->model(); }
};

inline ScaleTable compute_scale(const LevyModel& model, double q, const GridSpec& grid,
                                ScaleOptions opt = {}) {
    ScaleTable t;
    t.q = q;
    t.x = grid.nodes();
    ScaleOptions o = opt;
    o.cache_hi = std::max(o.cache_hi, t.x.back() + 1.0);
    t.fn = std::make_shared<ScaleFunction>(model, q, o);
    t.fingerprint = model.fingerprint();
    t.w.reserve(t.x.size());
    t.w_tilted.reserve(t.x.size());
    t.err.reserve(t.x.size());
    for (double xi : t.x) {
        t.w.push_back(t.fn->value(xi));
        t.w_tilted.push_back(t.fn->tilted(xi));
        t.err.push_back(t.fn->error_estimate(xi));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Exit identities and limits
// ---------------------------------------------------------------------------

// u(x, y) = e^{-px} W(y) - W(y - x), the potential density before tau_0^-.
inline double resolvent_density(const ScaleTable& table, double x, double y) {
    return table.fn->resolvent(x, y);
}

// P_x(tau_c^- < tau_b^+) = W(b - x) / W(b - c).
inline double exit_down_prob(const ScaleTable& table, double x, double c, double b) {
    if (!(c < x && x < b)) throw domain_error("exit_down_prob: need c < x < b");
    return table.fn->value(b - x) / table.fn->value(b - c);
}

// E_x e^{-q tau_c^-} = e^{-Phi(q)(x - c)}.
inline double ruin_laplace(const LevyModel& model, double x, double c, double q) {
    if (!(x >= c)) throw domain_error("ruin_laplace: need x >= c");
    if (q < 0) throw domain_error("ruin_laplace: q must be >= 0");
    return std::exp(-model.phi(q) * (x - c));
}

struct RenewalCheck {
    double value;           // e^{-px} W(x+y) - W(y)
    double analytic_limit;  // (1 - e^{-px}) / gamma
};

inline RenewalCheck renewal_limit(const ScaleTable& table, double x, double y) {
    const LevyModel& m = table.model();
    if (!(x > 0 && y > 0)) throw domain_error("renewal_limit: x, y must be > 0");
    if (!(m.p() > 0) || !std::isfinite(m.gamma()) || !(m.gamma() > 0))
        throw unsupported_model_error("renewal_limit: needs p > 0 and gamma in (0, inf)");
    // e^{-px} W(x+y) - W(y) = u(x, x+y); reuse the cancellation-safe path
    const double v = table.fn->resolvent(x, x + y);
    return {v, -std::expm1(-m.p() * x) / m.gamma()};
}

// ---------------------------------------------------------------------------
// Stationary overshoot law, Laplace transform rho(s) = p psi(s) / (gamma s (s-p)).
// The removable singularities at s = 0 and s = p are handled by the exact
// factorizations psi(s)/s and psi(p+u)/u, both cancellation-free.
// ---------------------------------------------------------------------------

class OvershootLaw {
public:
    explicit OvershootLaw(LevyModel model) : model_(std::move(model)) {
        if (!(model_.p() > 0) || !std::isfinite(model_.gamma()) || !(model_.gamma() > 0))
            throw unsupported_model_error("overshoot law: needs p > 0 and gamma in (0, inf)");
        tilted_ = model_.jumps().tilted(model_.p());
        x1b_gap_ = model_.jumps().x1_below(1.0) - tilted_.x1_below(1.0);
    }

    const LevyModel& model() const { return model_; }

    double transform(double s) const {
        if (s < 0) throw domain_error("overshoot transform: s must be >= 0");
        const double p = model_.p();
        const double g = model_.gamma();
        if (s < 0.5 * p) return p * model_.psi_over_s(s) / (g * (s - p));
        return p * psi_p_over(s - p) / (g * s);
    }

private:
    // psi(p + u) / u, stable through u = 0 where it equals psi'(p).
    double psi_p_over(double u) const {
        const double s2 = model_.sigma2_total();
        const double p = model_.p();
        return 0.5 * s2 * (2.0 * p + u) - model_.mu() + x1b_gap_ +
               tilted_.laplace_term_over(u);
    }

    LevyModel model_;
    JumpMeasure tilted_;
    double x1b_gap_ = 0.0;
};

// ---------------------------------------------------------------------------
// Laplace round trip: int_0^inf e^{-sy} W^{(q)}(y) dy vs 1/(psi(s) - q).
// ---------------------------------------------------------------------------

struct RoundTrip {
    double numeric, analytic, rel_err;
};

inline RoundTrip scale_laplace_roundtrip(const ScaleFunction& fn, double s,
                                         double x_cut = 50.0) {
    const double a = fn.alpha();
    if (!(s > a)) throw domain_error("roundtrip: need s > Phi(q)");
    auto g = [&](double y) { return std::exp(-(s - a) * y) * fn.tilted(y); };
    QuadSpec spec;
    spec.abs_tol = 1e-13;
    spec.rel_tol = 1e-11;
    double total = 0.0;
    double lo = 0.0;
    const double panel = std::max(1.0, 4.0 / (s - a));
    while (lo < x_cut) {
        const double hi = std::min(lo + panel, x_cut);
        total += integrate(g, lo, hi, spec);
        lo = hi;
    }
    // tail: W_alpha has essentially reached its limit by x_cut for the models
    // in range here (the residual gap decays exponentially)
    const double lim = fn.tilted_limit();
    if (std::isfinite(lim)) total += std::exp(-(s - a) * x_cut) * lim / (s - a);
    const double analytic = 1.0 / (fn.model().psi(s) - fn.q());
    return {total, analytic, std::abs(total - analytic) / std::abs(analytic)};
}

}  // namespace lamperti
