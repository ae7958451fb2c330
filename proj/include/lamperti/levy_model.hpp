#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "lamperti/errors.hpp"
#include "lamperti/incomplete_gamma.hpp"
#include "lamperti/quadrature.hpp"
#include "lamperti/rng.hpp"
#include "lamperti/roots.hpp"

namespace lamperti {

// ---------------------------------------------------------------------------
// Jump size densities for the compound-Poisson variant.
// ---------------------------------------------------------------------------

struct ExponentialDensity {
    double rate;  // f(x) = rate * e^{-rate x} on (0, inf)
};

struct UniformDensity {
    double a, b;  // uniform on (a, b), 0 <= a < b
};

using JumpDensity = std::variant<ExponentialDensity, UniformDensity>;

// ---------------------------------------------------------------------------
// JumpMeasure: spectrally positive Lévy measure, one of
//   none | compound-poisson(rate, density) | power-tail(C, a, eps0)
// with an Esscher tilt folded in as a weight e^{-tilt x}. The power-tail
// variant is truncated at eps0 and records the Gaussian variance of the
// discarded small-jump part, so analytics and simulation share one measure.
// ---------------------------------------------------------------------------

struct NoJumps {};

struct CompoundPoissonJumps {
    double rate;
    JumpDensity density;
};

struct PowerTailJumps {
    double coefficient;  // C in Pi(dx) = C x^{-1-a} dx
    double exponent;     // a in (0, 2)
    double truncation;   // eps0 > 0; measure lives on (eps0, inf)
};

class JumpMeasure {
public:
    JumpMeasure() : v_(NoJumps{}) {}
    JumpMeasure(NoJumps n) : v_(n) {}  // NOLINT(google-explicit-constructor)
    JumpMeasure(CompoundPoissonJumps cp) : v_(cp) { validate(); }  // NOLINT
    JumpMeasure(PowerTailJumps pt) : v_(pt) { validate(); }        // NOLINT

    bool trivial() const { return std::holds_alternative<NoJumps>(v_); }
    double tilt() const { return tilt_; }
    const std::variant<NoJumps, CompoundPoissonJumps, PowerTailJumps>& variant_of() const {
        return v_;
    }

    // Largest forbidden tilt: total tilt must stay strictly above this.
    double min_tilt() const {
        return std::visit(
            [](const auto& j) -> double {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, NoJumps>) return -kInf;
                if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                    if (const auto* e = std::get_if<ExponentialDensity>(&j.density))
                        return -e->rate;
                    return -kInf;  // bounded support
                }
                if constexpr (std::is_same_v<T, PowerTailJumps>) return 0.0;
            },
            v_);
    }

    // int (e^{-sx} - 1 + s x 1(x<1)) Pi_t(dx); stable down to s -> 0 and for
    // moderately negative s where the measure is light enough.
    double laplace_term(double s) const {
        if (trivial() || s == 0.0) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                // L(s) - L(0) = -c s / (rho (rho + s)), exact and cancellation-free
                const double c = cp->rate * e->rate;
                return -c * s / (rho * (rho + s)) + s * x1_below(1.0);
            }
        }
        auto f = [&](double x) {
            const double u = s * x;
            const double core = (x < 1.0) ? exp_compensated(u) : std::expm1(-u);
            return core * density_at(x);
        };
        return integrate_split(f);
    }

    std::complex<double> laplace_term(std::complex<double> s) const {
        if (trivial()) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                const double c = cp->rate * e->rate;
                return -c * s / (rho * (rho + s)) + s * x1_below(1.0);
            }
        }
        if (const auto* pt = std::get_if<PowerTailJumps>(&v_)) {
            // int_eps^inf e^{-wx} x^{-1-a} dx = w^a Gamma(-a, eps w); the
            // Gamma(-a) pole at a = 1 makes the series form ill-conditioned
            // in a neighborhood, where the quadrature path takes over
            const double a = pt->exponent;
            if (std::abs(a - 1.0) > 0.05) {
                const std::complex<double> w = s + tilt_;
                const std::complex<double> J =
                    std::pow(w, a) * upper_gamma(-a, pt->truncation * w);
                return pt->coefficient * J - m0_cache_ + s * x1b1_cache_;
            }
        }
        return std::visit(
            [&](const auto& j) -> std::complex<double> {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, NoJumps>) return 0.0;
                else {
                    auto f = [&](double x) {
                        const std::complex<double> core =
                            std::exp(-s * x) - 1.0 + (x < 1.0 ? s * x : std::complex<double>{});
                        return core * density_at(x);
                    };
                    return integrate_split(f);
                }
            },
            v_);
    }

    // d/ds of laplace_term: int (x 1(x<1) - x e^{-sx}) Pi_t(dx).
    double laplace_term_prime(double s) const {
        if (trivial()) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                const double c = cp->rate * e->rate;
                return x1_below(1.0) - c / ((rho + s) * (rho + s));
            }
        }
        auto f = [&](double x) {
            return ((x < 1.0 ? x : 0.0) - x * std::exp(-s * x)) * density_at(x);
        };
        return integrate_split(f);
    }

    // laplace_term(s) / s, stable at s = 0 (limit is -mean_above(1)).
    double laplace_term_over(double s) const {
        if (trivial()) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                const double c = cp->rate * e->rate;
                return -c / (rho * (rho + s)) + x1_below(1.0);
            }
        }
        auto f = [&](double x) {
            const double u = s * x;
            const double core = (x < 1.0) ? exp_compensated_over(u) : expm1_over(u);
            return x * core * density_at(x);
        };
        return integrate_split(f);
    }

    // Moments of the tilted measure.
    double x1_below(double t) const { return moment_below(t, 1); }
    double x2_below(double t) const { return moment_below(t, 2); }

    double mass_above(double t) const {
        if (trivial()) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                return cp->rate * e->rate * std::exp(-rho * std::max(t, 0.0)) / rho;
            }
        }
        auto f = [&](double x) { return density_at(x); };
        return integrate_to_region(f, std::max(t, support_lo()));
    }

    // int_t^inf x Pi_t(dx); +inf for an untilted power tail with a <= 1.
    double mean_above(double t) const {
        if (trivial()) return 0.0;
        if (const auto* pt = std::get_if<PowerTailJumps>(&v_)) {
            if (tilt_ == 0.0) {
                const double lo = std::max(t, pt->truncation);
                if (pt->exponent <= 1.0) return kInf;
                return pt->coefficient * std::pow(lo, 1.0 - pt->exponent) /
                       (pt->exponent - 1.0);
            }
        }
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                const double a = std::max(t, 0.0);
                return cp->rate * e->rate * (a / rho + 1.0 / (rho * rho)) *
                       std::exp(-rho * a);
            }
        }
        auto f = [&](double x) { return x * density_at(x); };
        return integrate_to_region(f, std::max(t, support_lo()));
    }

    // Gaussian variance recorded for the small jumps cut off by the power-tail
    // truncation (from the untruncated law); 0 for other variants.
    double compensation_variance() const {
        if (const auto* pt = std::get_if<PowerTailJumps>(&v_)) {
            return pt->coefficient * std::pow(pt->truncation, 2.0 - pt->exponent) /
                   (2.0 - pt->exponent);
        }
        return 0.0;
    }

    double one_wedge_x2() const { return one_wedge_x2_; }

    JumpMeasure tilted(double alpha) const {
        JumpMeasure out = *this;
        const double t = tilt_ + alpha;
        if (!(t >= 0.0 || t > min_tilt()))
            throw model_error("esscher tilt outside the jump measure's domain");
        out.tilt_ = t;
        out.validate();
        return out;
    }

    // Activity rate of jumps >= eps under the normalized tilted measure.
    double rate_above(double eps) const { return mass_above(eps); }

    // Draw a jump size conditioned to be >= eps.
    double sample_size(double eps, rng::Stream& rng) const {
        if (trivial()) throw domain_error("sample_size: trivial jump measure");
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                return std::max(eps, 0.0) + rng.next_exponential(rho);
            }
            const auto& u = std::get<UniformDensity>(cp->density);
            const double lo = std::max(u.a, eps);
            if (lo >= u.b) throw domain_error("sample_size: eps beyond support");
            for (int k = 0; k < 100000; ++k) {
                const double x = lo + (u.b - lo) * rng.next_double();
                if (tilt_ == 0.0) return x;
                const double ref = tilt_ > 0 ? lo : u.b;
                if (rng.next_double() < std::exp(-tilt_ * (x - ref))) return x;
            }
            throw numeric_error("sample_size: tilted-uniform rejection stalled");
        }
        const auto& pt = std::get<PowerTailJumps>(v_);
        const double lo = std::max(eps, pt.truncation);
        for (int k = 0; k < 100000; ++k) {
            // Pareto tail: P(X > x) = (lo/x)^a
            const double x = lo * std::pow(rng.next_double(), -1.0 / pt.exponent);
            if (tilt_ == 0.0) return x;
            if (rng.next_double() < std::exp(-tilt_ * (x - lo))) return x;
        }
        throw numeric_error("sample_size: tilted power-tail rejection stalled");
    }

    std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& j) {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, NoJumps>) os << "none";
                if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                    os << "cp(rate=" << j.rate << ",";
                    if (const auto* e = std::get_if<ExponentialDensity>(&j.density))
                        os << "exp(" << e->rate << ")";
                    else {
                        const auto& u = std::get<UniformDensity>(j.density);
                        os << "unif(" << u.a << "," << u.b << ")";
                    }
                    os << ")";
                }
                if constexpr (std::is_same_v<T, PowerTailJumps>)
                    os << "pt(C=" << j.coefficient << ",a=" << j.exponent
                       << ",eps=" << j.truncation << ")";
            },
            v_);
        if (tilt_ != 0.0) os << "@tilt=" << tilt_;
        return os.str();
    }

private:
    void validate() {
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (!(cp->rate > 0)) throw model_error("compound-poisson rate must be > 0");
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                if (!(e->rate > 0)) throw model_error("exponential jump rate must be > 0");
            } else {
                const auto& u = std::get<UniformDensity>(cp->density);
                if (!(u.a >= 0 && u.b > u.a))
                    throw model_error("uniform jump support must satisfy 0 <= a < b");
            }
        }
        if (const auto* pt = std::get_if<PowerTailJumps>(&v_)) {
            if (!(pt->coefficient > 0 && pt->truncation > 0))
                throw model_error("power-tail coefficient and truncation must be > 0");
            if (!(pt->exponent > 0 && pt->exponent < 2))
                throw model_error(
                    "power-tail exponent must lie in (0, 2): the cut small-jump part "
                    "has no finite compensation variance otherwise");
        }
        // mass check: int (1 ^ x^2) Pi_t(dx) < inf, verified numerically
        one_wedge_x2_ = trivial() ? 0.0 : x2_below(1.0) + mass_above(1.0);
        if (!std::isfinite(one_wedge_x2_))
            throw model_error("jump measure fails the (1 ^ x^2) integrability check");
        m0_cache_ = trivial() ? 0.0 : mass_above(support_lo());
        x1b1_cache_ = trivial() ? 0.0 : x1_below(1.0);
    }

    double support_lo() const {
        if (const auto* pt = std::get_if<PowerTailJumps>(&v_)) return pt->truncation;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* u = std::get_if<UniformDensity>(&cp->density)) return u->a;
        }
        return 0.0;
    }

    double support_hi() const {
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* u = std::get_if<UniformDensity>(&cp->density)) return u->b;
        }
        return kInf;
    }

    // Density of the tilted measure at x (w.r.t. Lebesgue).
    double density_at(double x) const {
        const double w = std::exp(-tilt_ * x);
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density))
                return cp->rate * e->rate * std::exp(-e->rate * x) * w;
            const auto& u = std::get<UniformDensity>(cp->density);
            return (x > u.a && x < u.b) ? cp->rate / (u.b - u.a) * w : 0.0;
        }
        const auto& pt = std::get<PowerTailJumps>(v_);
        return (x > pt.truncation) ? pt.coefficient * std::pow(x, -1.0 - pt.exponent) * w
                                   : 0.0;
    }

    double moment_below(double t, int k) const {
        if (trivial() || t <= support_lo()) return 0.0;
        if (const auto* cp = std::get_if<CompoundPoissonJumps>(&v_)) {
            if (const auto* e = std::get_if<ExponentialDensity>(&cp->density)) {
                const double rho = e->rate + tilt_;
                const double c = cp->rate * e->rate;
                const double et = std::exp(-rho * t);
                if (k == 1) return c * (1.0 / (rho * rho) - (t / rho + 1.0 / (rho * rho)) * et);
                return c * (2.0 / (rho * rho * rho) -
                            (t * t / rho + 2.0 * t / (rho * rho) + 2.0 / (rho * rho * rho)) * et);
            }
        }
        auto f = [&](double x) { return std::pow(x, k) * density_at(x); };
        const double hi = std::min(t, support_hi());
        return integrate(f, support_lo(), hi);
    }

    // Integrate a tilted-density integrand over (lo, support_hi()).
    template <class F>
    double integrate_to_region(F&& f, double lo) const {
        const double hi = support_hi();
        if (std::isfinite(hi)) return lo >= hi ? 0.0 : integrate(f, lo, hi);
        auto r = integrate_to_inf(f, lo);
        if (r.status == TailStatus::divergent) return kInf;
        if (r.status == TailStatus::inconclusive)
            throw numeric_error("jump-measure tail integral did not settle");
        return r.value;
    }

    // Split the psi-integrand at the compensation cutoff x = 1, then out to the
    // support end (the integrand changes character at the cutoff).
    template <class F>
    std::invoke_result_t<F&, double> integrate_split(F&& f) const {
        using T = std::invoke_result_t<F&, double>;
        const double lo = support_lo();
        const double hi = support_hi();
        QuadSpec spec;  // 1e-12 abs / 1e-10 rel
        T total{};
        if (lo < 1.0) total += integrate(f, lo, std::min(1.0, hi), spec);
        if (hi > 1.0) {
            const double start = std::max(lo, 1.0);
            if (std::isfinite(hi)) {
                total += integrate(f, start, hi, spec);
            } else {
                double a = start, h = 1.0;
                T prev{};
                for (int kseg = 0; kseg < 200; ++kseg) {
                    const T seg = integrate(f, a, a + h, spec);
                    total += seg;
                    if (std::abs(seg) < 1e-14 * (1.0 + std::abs(total)) && kseg > 2 &&
                        std::abs(prev) < 1e-14 * (1.0 + std::abs(total)))
                        break;
                    prev = seg;
                    a += h;
                    h *= 1.6;
                }
            }
        }
        return total;
    }

    std::variant<NoJumps, CompoundPoissonJumps, PowerTailJumps> v_;
    double tilt_ = 0.0;
    double one_wedge_x2_ = 0.0;
    double m0_cache_ = 0.0;    // total tilted mass
    double x1b1_cache_ = 0.0;  // int_0^1 x Pi_t(dx)
};

// ---------------------------------------------------------------------------
// LevyModel: the driving spectrally positive Lévy process, through its Laplace
// exponent psi(s) = sigma^2 s^2/2 - mu s + int (e^{-sx} - 1 + sx 1(x<1)) Pi(dx).
// The path drift is +mu in this convention and gamma = E xi_1 = -psi'(0).
// ---------------------------------------------------------------------------

class LevyModel {
public:
    LevyModel(double sigma2, double mu, JumpMeasure jumps = {})
        : sigma2_(sigma2), mu_(mu), jumps_(std::move(jumps)) {
        if (!(sigma2_ >= 0) || !std::isfinite(sigma2_) || !std::isfinite(mu_))
            throw model_error("sigma2 must be finite and >= 0, mu finite");
        sigma2_total_ = sigma2_ + jumps_.compensation_variance();
        if (sigma2_total_ == 0.0 && jumps_.trivial() && mu_ == 0.0)
            throw model_error("degenerate model: no diffusion, no jumps, no drift");
        m01_ = jumps_.x1_below(1.0);
        const double tail_mean = jumps_.mean_above(1.0);
        gamma_ = std::isfinite(tail_mean) ? mu_ + tail_mean : kInf;
        p_ = compute_p();
    }

    double sigma2() const { return sigma2_; }
    double sigma2_total() const { return sigma2_total_; }
    double mu() const { return mu_; }
    const JumpMeasure& jumps() const { return jumps_; }
    bool has_jumps() const { return !jumps_.trivial(); }
    // Drift of the finite-activity path representation xi_t = mu_eff t + jumps.
    double mu_eff() const { return mu_ - m01_; }
    bool bounded_variation() const { return sigma2_total_ == 0.0; }

    double p() const { return p_; }
    double gamma() const { return gamma_; }

    double psi(double s) const {
        if (s < 0) throw domain_error("psi: s must be >= 0");
        return psi_unchecked(s);
    }

    std::complex<double> psi(std::complex<double> s) const {
        if (s.real() < 0) throw domain_error("psi: Re s must be >= 0");
        return 0.5 * sigma2_total_ * s * s - mu_ * s + jumps_.laplace_term(s);
    }

    double psi_prime(double s) const {
        if (s < 0) throw domain_error("psi_prime: s must be >= 0");
        return sigma2_total_ * s - mu_ + jumps_.laplace_term_prime(s);
    }

    // psi(s)/s without cancellation; psi_over_s(0) = -gamma.
    double psi_over_s(double s) const {
        if (s < 0) throw domain_error("psi_over_s: s must be >= 0");
        return 0.5 * sigma2_total_ * s - mu_ + jumps_.laplace_term_over(s);
    }

    // psi continued to s < 0 where the jump tail allows it (light tails only).
    double psi_extended(double s) const {
        if (!(s >= 0.0 || s > jumps_.min_tilt()))
            throw domain_error("psi_extended: s outside the jump transform domain");
        return psi_unchecked(s);
    }

    // Right inverse: largest root of psi(s) = q.
    double phi(double q) const {
        if (q < 0) throw domain_error("phi: q must be >= 0");
        if (q == 0.0) return p_;
        if (sigma2_total_ == 0.0 && mu_ - m01_ >= 0.0)
            throw unsupported_model_error("phi: psi(s) = q has no root for monotone paths");
        double lo = p_;
        double hi = std::max(1.0, 2.0 * p_);
        int guard = 0;
        while (psi_unchecked(hi) <= q) {
            hi *= 2.0;
            if (++guard > 400)
                throw numeric_error("phi: bracket expansion failed, psi(" +
                                    std::to_string(hi) + ") <= q");
        }
        const double root =
            solve_bracketed([&](double s) { return psi_unchecked(s) - q; }, lo, hi);
        if (std::abs(psi_unchecked(root) - q) > 1e-10 * (1.0 + std::abs(q)))
            throw numeric_error("phi: residual above tolerance at s=" + std::to_string(root));
        return root;
    }

    // Left root of psi = q (Cramer-Lundberg root), light-tail models only.
    double phi_left(double q) const {
        if (q < 0) throw domain_error("phi_left: q must be >= 0");
        if (q == 0.0) return 0.0;
        const double floor = jumps_.min_tilt();
        double lo = -1.0;
        if (std::isfinite(floor)) lo = 0.5 * floor;
        int guard = 0;
        while (psi_extended(lo) <= q) {
            const double next = std::isfinite(floor) ? 0.5 * (lo + floor) : 2.0 * lo;
            if (next == lo || ++guard > 200)
                throw unsupported_model_error("phi_left: no left root in the transform domain");
            lo = next;
        }
        return solve_bracketed([&](double s) { return psi_extended(s) - q; }, lo, 0.0);
    }

    // Phi'(q) = 1 / psi'(Phi(q)); +inf at a critical point.
    double phi_prime(double q) const {
        const double d = psi_prime(phi(q));
        return d > 0 ? 1.0 / d : kInf;
    }
    double phi_prime0() const { return phi_prime(0.0); }

    LevyModel esscher(double alpha) const {
        if (!(alpha >= 0.0 || alpha > jumps_.min_tilt()))
            throw model_error("esscher: psi(alpha) diverges for this jump measure");
        JumpMeasure tj = jumps_.tilted(alpha);
        // mu_alpha = mu - sigma^2 alpha - int_0^1 x (1 - e^{-alpha x}) Pi(dx)
        const double dm = jumps_.x1_below(1.0) - tj.x1_below(1.0);
        LevyModel out(sigma2_, mu_ - sigma2_total_ * alpha - dm, std::move(tj));
        out.sigma2_total_ = sigma2_total_;  // tilt leaves the Gaussian part alone
        // pointwise check of psi_alpha(s) = psi(alpha+s) - psi(alpha)
        const double base = psi_extended(alpha);
        for (double s : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            const double want = psi_extended(alpha + s) - base;
            const double got = out.psi_unchecked(s);
            if (std::abs(got - want) > 1e-9 * (1.0 + std::abs(want)))
                throw numeric_error("esscher: tilted exponent failed the check grid at s=" +
                                    std::to_string(s));
        }
        // and of the right inverse, Phi_alpha(s) = Phi(psi(alpha)+s) - alpha
        if (!(sigma2_total_ == 0.0 && mu_ - m01_ >= 0.0)) {
            for (double s : {0.5, 2.0}) {
                const double q = base + s;
                if (q < 0) continue;
                const double want = phi(q) - alpha;
                const double got = out.phi(s);
                if (std::abs(got - want) > 1e-8 * (1.0 + std::abs(want)))
                    throw numeric_error("esscher: tilted inverse failed the check grid at s=" +
                                        std::to_string(s));
            }
        }
        return out;
    }

    std::string fingerprint() const {
        std::ostringstream os;
        os.precision(17);
        os << "splp{s2=" << sigma2_ << ",s2tot=" << sigma2_total_ << ",mu=" << mu_
           << ",J=" << jumps_.describe() << "}";
        return os.str();
    }

private:
    double psi_unchecked(double s) const {
        if (s == 0.0) return 0.0;
        return 0.5 * sigma2_total_ * s * s - mu_ * s + jumps_.laplace_term(s);
    }

    double compute_p() const {
        // gamma <= 0 (psi'(0) >= 0): psi is nonnegative increasing, p = 0.
        if (!(gamma_ > 0)) return 0.0;
        // monotone increasing paths (subordinators): psi < 0 on (0, inf),
        // so Phi(0) = sup{s : psi(s) = 0} = 0
        if (sigma2_total_ == 0.0 && mu_ - m01_ >= 0.0) return 0.0;
        double hi = 1.0;
        int guard = 0;
        while (psi_unchecked(hi) <= 0.0) {
            hi *= 2.0;
            if (++guard > 400) throw numeric_error("p: psi stayed <= 0 during expansion");
        }
        double lo = 0.5 * hi;
        guard = 0;
        while (psi_unchecked(lo) >= 0.0) {
            lo *= 0.5;
            if (lo < 1e-300 || ++guard > 2000)
                throw numeric_error("p: could not bracket the positive root");
        }
        return solve_bracketed([&](double s) { return psi_unchecked(s); }, lo, hi);
    }

    double sigma2_ = 0.0;
    double sigma2_total_ = 0.0;
    double mu_ = 0.0;
    JumpMeasure jumps_;
    double m01_ = 0.0;
    double gamma_ = 0.0;
    double p_ = 0.0;
};

}  // namespace lamperti
