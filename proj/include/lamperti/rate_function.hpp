#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lamperti/errors.hpp"
#include "lamperti/quadrature.hpp"

namespace lamperti {

enum class TriState { yes, no, inconclusive };

inline const char* to_string(TriState t) {
    switch (t) {
        case TriState::yes: return "yes";
        case TriState::no: return "no";
        default: return "inconclusive";
    }
}

// ---------------------------------------------------------------------------
// RateFunction: the branching rate R(x) > 0 on (0, inf); omega = 1/R drives
// the additive functional eta. Variants carry enough metadata to decide the
// paper's integral tests analytically where possible.
// ---------------------------------------------------------------------------

struct PowerRate {
    double c = 0.0;      // R(x) = scale * (c + x)^theta
    double theta = 1.0;
    double scale = 1.0;
};

struct ExponentialRate {
    double lambda = 1.0;  // R(x) = scale * e^{lambda x}
    double scale = 1.0;
};

// Log-log piecewise-linear interpolant through (x_i, r_i); extrapolated as a
// power with the declared endpoint exponents when present. Absent exponents
// leave the integral tests to the numeric tri-state path.
struct TabulatedRate {
    std::vector<double> x, r;
    std::optional<double> theta0;     // R(x) ~ r_0 (x/x_0)^{theta0} as x -> 0+
    std::optional<double> theta_inf;  // R(x) ~ r_N (x/x_N)^{theta_inf} as x -> inf
};

class RateFunction {
public:
    RateFunction(PowerRate p) : v_(p) {  // NOLINT(google-explicit-constructor)
        if (!(p.scale > 0) || !(p.c >= 0)) throw domain_error("power rate: need scale > 0, c >= 0");
    }
    RateFunction(ExponentialRate e) : v_(e) {  // NOLINT
        if (!(e.scale > 0) || !(e.lambda > 0))
            throw domain_error("exponential rate: need scale > 0, lambda > 0");
    }
    RateFunction(TabulatedRate t) : v_(std::move(t)) {  // NOLINT
        const auto& tab = std::get<TabulatedRate>(v_);
        if (tab.x.size() < 2 || tab.x.size() != tab.r.size())
            throw domain_error("tabulated rate: need >= 2 knots, matching sizes");
        for (std::size_t i = 0; i < tab.x.size(); ++i) {
            if (!(tab.x[i] > 0) || !(tab.r[i] > 0))
                throw domain_error("tabulated rate: knots must be positive");
            if (i > 0 && !(tab.x[i] > tab.x[i - 1]))
                throw domain_error("tabulated rate: abscissae must increase");
        }
    }

    double operator()(double x) const {
        if (!(x > 0) && !domain_ok(x)) throw domain_error("rate: x outside the rate's domain");
        return std::visit(
            [&](const auto& v) -> double {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, PowerRate>)
                    return v.scale * std::pow(v.c + x, v.theta);
                else if constexpr (std::is_same_v<T, ExponentialRate>)
                    return v.scale * std::exp(v.lambda * x);
                else
                    return tab_value(v, x);
            },
            v_);
    }

    double omega(double x) const { return 1.0 / (*this)(x); }

    // Power exponent of R at 0+ (0 whenever R(0+) > 0); nullopt when unknown.
    std::optional<double> exponent_at_zero() const {
        if (const auto* p = std::get_if<PowerRate>(&v_)) return p->c > 0 ? 0.0 : p->theta;
        if (std::holds_alternative<ExponentialRate>(v_)) return 0.0;
        return std::get<TabulatedRate>(v_).theta0;
    }

    // Power exponent of R at infinity; nullopt for exponential growth / unknown.
    std::optional<double> exponent_at_inf() const {
        if (const auto* p = std::get_if<PowerRate>(&v_)) return p->theta;
        if (std::holds_alternative<ExponentialRate>(v_)) return std::nullopt;
        return std::get<TabulatedRate>(v_).theta_inf;
    }

    bool exponential_tail() const { return std::holds_alternative<ExponentialRate>(v_); }

    // H2 index when it is a variant read-off: 0 for power, lambda for exponential.
    std::optional<double> lambda_exact() const {
        if (std::holds_alternative<PowerRate>(v_)) return 0.0;
        if (const auto* e = std::get_if<ExponentialRate>(&v_)) return e->lambda;
        return std::nullopt;
    }

    // int_x^inf dy / R(y)^k for k = 1, 2; analytic for the closed variants.
    TailIntegral inv_tail(double x, int k = 1) const {
        if (const auto* p = std::get_if<PowerRate>(&v_)) {
            const double kt = k * p->theta;
            TailIntegral t;
            if (kt > 1.0) {
                t.status = TailStatus::converged;
                t.value = std::pow(p->c + x, 1.0 - kt) / ((kt - 1.0) * std::pow(p->scale, k));
            } else {
                t.status = TailStatus::divergent;
                t.value = kInf;
            }
            return t;
        }
        if (const auto* e = std::get_if<ExponentialRate>(&v_)) {
            TailIntegral t;
            t.status = TailStatus::converged;
            t.value = std::exp(-k * e->lambda * x) / (k * e->lambda * std::pow(e->scale, k));
            return t;
        }
        return tab_inv_tail(std::get<TabulatedRate>(v_), x, k);
    }

    std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, PowerRate>) {
                    os << "power(c=" << v.c << ",theta=" << v.theta;
                    if (v.scale != 1.0) os << ",scale=" << v.scale;
                    os << ")";
                } else if constexpr (std::is_same_v<T, ExponentialRate>) {
                    os << "exp(lambda=" << v.lambda;
                    if (v.scale != 1.0) os << ",scale=" << v.scale;
                    os << ")";
                } else {
                    os << "tabulated(" << v.x.size() << " knots)";
                }
            },
            v_);
        return os.str();
    }

    const std::variant<PowerRate, ExponentialRate, TabulatedRate>& variant_of() const {
        return v_;
    }

private:
    // R is only meaningful on (0, inf); constant and exponential variants
    // extend to the whole line, which the free-path samplers rely on.
    bool domain_ok(double x) const {
        if (const auto* p = std::get_if<PowerRate>(&v_))
            return p->theta == 0.0 || (p->c > 0 ? x > -p->c : x > 0);
        if (std::holds_alternative<ExponentialRate>(v_)) return true;
        return x > 0;  // tabulated
    }

    static double tab_value(const TabulatedRate& t, double x) {
        const auto n = t.x.size();
        auto slope = [&](std::size_t i) {
            return std::log(t.r[i + 1] / t.r[i]) / std::log(t.x[i + 1] / t.x[i]);
        };
        if (x <= t.x.front()) {
            const double m = t.theta0 ? *t.theta0 : slope(0);
            return t.r.front() * std::pow(x / t.x.front(), m);
        }
        if (x >= t.x.back()) {
            const double m = t.theta_inf ? *t.theta_inf : slope(n - 2);
            return t.r.back() * std::pow(x / t.x.back(), m);
        }
        std::size_t i = 0;
        while (i + 2 < n && t.x[i + 1] < x) ++i;
        return t.r[i] * std::pow(x / t.x[i], slope(i));
    }

    TailIntegral tab_inv_tail(const TabulatedRate& t, double x, int k) const {
        TailIntegral out;
        // piecewise power segments have closed-form integrals
        auto seg = [&](double a, double b, double ra, double m) {
            // R(y) = ra (y/a)^m on [a,b]; int dy/R^k
            const double km = k * m;
            if (std::abs(km - 1.0) < 1e-12)
                return std::log(b / a) * a / std::pow(ra, k) / 1.0;
            return a / (std::pow(ra, k) * (1.0 - km)) *
                   (std::pow(b / a, 1.0 - km) - 1.0);
        };
        double total = 0.0;
        const auto n = t.x.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double a = std::max(x, t.x[i]);
            const double b = t.x[i + 1];
            if (a >= b) continue;
            const double m = std::log(t.r[i + 1] / t.r[i]) / std::log(t.x[i + 1] / t.x[i]);
            const double ra = t.r[i] * std::pow(a / t.x[i], m);
            total += seg(a, b, ra, m);
        }
        if (!t.theta_inf) {
            out.value = total;
            out.status = TailStatus::inconclusive;
            return out;
        }
        const double m = *t.theta_inf;
        const double a = std::max(x, t.x.back());
        const double ra = t.r.back() * std::pow(a / t.x.back(), m);
        if (k * m > 1.0) {
            total += a / (std::pow(ra, k) * (k * m - 1.0));
            out.value = total;
            out.status = TailStatus::converged;
        } else {
            out.value = kInf;
            out.status = TailStatus::divergent;
        }
        return out;
    }

    std::variant<PowerRate, ExponentialRate, TabulatedRate> v_;
};

// ---------------------------------------------------------------------------
// PhiFunction: the explosion clock phi(x) = gamma^{-1} int_x^inf dy/R(y) and
// its right inverse. Requires H0; closed forms for the closed variants.
// ---------------------------------------------------------------------------

class PhiFunction {
public:
    PhiFunction(RateFunction rate, double gamma) : rate_(std::move(rate)), gamma_(gamma) {
        if (!(gamma_ > 0) || !std::isfinite(gamma_))
            throw precondition_error("gamma", "phi needs gamma in (0, inf)");
        const TailIntegral probe = rate_.inv_tail(1.0);
        if (probe.status == TailStatus::divergent)
            throw precondition_error("H0", "phi undefined: int^inf dy/R diverges");
        if (probe.status == TailStatus::inconclusive)
            throw precondition_error("H0", "phi undefined: tail of 1/R is inconclusive");
    }

    double gamma() const { return gamma_; }
    const RateFunction& rate() const { return rate_; }

    double operator()(double x) const { return rate_.inv_tail(x).value / gamma_; }

    // sup{ s > 0 : phi(s) > t }, with 0 when t >= phi(0+).
    double inverse(double t) const {
        if (!(t > 0)) throw domain_error("phi inverse: t must be > 0");
        if (const auto* p = std::get_if<PowerRate>(&rate_.variant_of())) {
            const double raw =
                std::pow(gamma_ * (p->theta - 1.0) * p->scale * t, 1.0 / (1.0 - p->theta)) -
                p->c;
            return std::max(raw, 0.0);
        }
        if (const auto* e = std::get_if<ExponentialRate>(&rate_.variant_of())) {
            const double raw = -std::log(gamma_ * e->lambda * e->scale * t) / e->lambda;
            return std::max(raw, 0.0);
        }
        // tabulated: monotone bisection
        double hi = 1.0;
        int guard = 0;
        while ((*this)(hi) > t) {
            hi *= 2.0;
            if (++guard > 200) throw numeric_error("phi inverse: no upper bracket");
        }
        double lo = hi * 0.5;
        guard = 0;
        while (lo > 1e-12 && (*this)(lo) <= t) {
            lo *= 0.5;
            if (++guard > 200) break;
        }
        if ((*this)(lo) <= t) return 0.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) > t)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    RateFunction rate_;
    double gamma_;
};

// ---------------------------------------------------------------------------
// Numeric H2 index estimate for rates without an exact read-off:
// lambda_hat(y) = -log(phi(y + d) / phi(y)) / d along growing y.
// ---------------------------------------------------------------------------

struct LambdaEstimate {
    std::optional<double> value;  // nullopt when the sequence fails to settle
    double spread = 0.0;
    bool exact = false;
    std::vector<double> sequence;
};

inline LambdaEstimate estimate_h2_lambda(const RateFunction& rate, double gamma) {
    LambdaEstimate out;
    if (auto ex = rate.lambda_exact()) {
        out.value = *ex;
        out.exact = true;
        return out;
    }
    PhiFunction phi(rate, gamma);
    const double d = 1.0;
    for (double y = 4.0; y <= 4.0 * 256.0; y *= 2.0)
        out.sequence.push_back(-std::log(phi(y + d) / phi(y)) / d);
    const std::size_t n = out.sequence.size();
    double spread = 0.0;
    for (std::size_t i = n - 3; i + 1 < n; ++i)
        spread = std::max(spread, std::abs(out.sequence[i + 1] - out.sequence[i]));
    out.spread = spread;
    const double last = out.sequence.back();
    if (spread <= 0.05 * (1.0 + std::abs(last))) out.value = std::max(last, 0.0);
    return out;
}

}  // namespace lamperti
