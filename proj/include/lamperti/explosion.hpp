#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lamperti/errors.hpp"
#include "lamperti/omega_scale.hpp"
#include "lamperti/scale_functions.hpp"
#include "lamperti/simulate.hpp"

namespace lamperti {

// ---------------------------------------------------------------------------
// Moment recursion m_n(x) = n int_0^inf u(x,y) omega(y) m_{n-1}(y) dy with
// m_0(x) = 1 - e^{-px}, quadrature against the resolvent density on a uniform
// grid (the y-integrand has a kink at y = x, which is always a node).
//
// The mass beyond the grid is closed with the renewal limit: for y >> x,
// u(x,y) -> (1 - e^{-px})/gamma and m_{n-1}(y) -> (n-1)! phi(y)^{n-1}, so
//   tail_n(x) ~ (n-1)! (1 - e^{-px}) phi(x_max)^n,
// which is added when phi exists and recorded as the tail bound (it dominates
// the residual error of the closure). Without gamma < inf the tail is only
// bounded through u <= W_p(inf) and the factorial envelope, never added.
// ---------------------------------------------------------------------------

struct MomentTable {
    int order = 0;
    std::vector<double> x;
    std::vector<double> m;
    double tail_bound = 0.0;
};

struct MomentOptions {
    double x_max = 60.0;
    int n_nodes = 1501;
    ScaleOptions scale;
};

namespace detail {

// int_0^inf omega W_p and the omega tail beyond x_max; shared by the moment
// machinery and the exponential-moment radius.
struct OmegaWpIntegrals {
    double full = 0.0;      // int_0^inf omega(y) W_p(y) dy
    double om_tail = 0.0;   // int_{x_max}^inf omega
    double wp_inf = 0.0;
};

inline OmegaWpIntegrals omega_wp_integrals(const ScaleFunction& W, const RateFunction& rate,
                                           double x_max) {
    OmegaWpIntegrals out;
    auto f = [&](double y) { return rate.omega(y) * W.tilted(y); };
    const double lo = 1e-9;
    const TailIntegral tail = integrate_to_inf(f, 1.0);
    if (tail.status != TailStatus::converged)
        throw precondition_error("H1", "int_1^inf omega W_p did not converge");
    out.full = integrate(f, lo, 1.0) + tail.value;
    const TailIntegral om = rate.inv_tail(x_max);
    out.om_tail = om.status == TailStatus::converged ? om.value : kInf;
    out.wp_inf = W.tilted_limit();
    return out;
}

inline double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

}  // namespace detail

inline std::vector<MomentTable> moment_recursion(const LevyModel& model,
                                                 const RateFunction& rate, int n_max,
                                                 MomentOptions opt = {}) {
    if (n_max < 0) throw domain_error("moment_recursion: n_max >= 0");
    if (!(model.p() > 0))
        throw precondition_error("p>0", "moment recursion needs p > 0");
    const ConditionReport cond = check_h0_h1_h2(model, rate);
    if (cond.h1 != TriState::yes)
        throw precondition_error("H1", std::string("moment recursion needs H1; status: ") +
                                           to_string(cond.h1));
    ScaleOptions so = opt.scale;
    so.cache_hi = std::max(so.cache_hi, opt.x_max + 1.0);
    const ScaleFunction W(model, 0.0, so);
    const auto ints = detail::omega_wp_integrals(W, rate, opt.x_max);
    const double p = model.p();
    std::optional<PhiFunction> phi;
    if (std::isfinite(model.gamma()) && model.gamma() > 0) {
        try {
            phi.emplace(rate, model.gamma());
        } catch (const std::exception&) {
            phi.reset();
        }
    }
    const double phi_xmax = phi ? (*phi)(opt.x_max) : 0.0;

    const auto n_nodes = static_cast<std::size_t>(opt.n_nodes);
    const double h = opt.x_max / static_cast<double>(opt.n_nodes - 1);
    std::vector<double> xs(n_nodes), om(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        xs[i] = h * static_cast<double>(i);
        om[i] = (i == 0) ? 0.0 : rate.omega(xs[i]);  // weighted by u(x,0) = 0 anyway
    }
    try {
        om[0] = rate.omega(0.0);
    } catch (const domain_error&) {
        om[0] = rate.omega(0.5 * h);  // singular omega at 0; integrand still vanishes
    }

    std::vector<MomentTable> tables;
    tables.reserve(static_cast<std::size_t>(n_max) + 1);
    MomentTable m0;
    m0.order = 0;
    m0.x = xs;
    m0.m.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) m0.m[i] = -std::expm1(-p * xs[i]);
    m0.tail_bound = 0.0;
    tables.push_back(std::move(m0));

    for (int n = 1; n <= n_max; ++n) {
        const auto& prev = tables.back();
        MomentTable cur;
        cur.order = n;
        cur.x = xs;
        cur.m.resize(n_nodes);
        // one pass per x over the shared y nodes (trapezoid; y = x is a node)
        const double fact_nm1 = detail::factorial(n - 1);
        for (std::size_t ix = 0; ix < n_nodes; ++ix) {
            double acc = 0.0;
            for (std::size_t iy = 0; iy < n_nodes; ++iy) {
                if (ix == 0) break;  // u(0, y) = 0
                const double g = prev.m[iy] * om[iy];
                if (g == 0.0) continue;
                const double u = W.resolvent(xs[ix], std::max(xs[iy], 1e-300));
                const double wgt = (iy == 0 || iy + 1 == n_nodes) ? 0.5 : 1.0;
                acc += wgt * u * g;
            }
            cur.m[ix] = n * h * acc;
            if (phi)  // renewal-limit closure of the tail beyond x_max
                cur.m[ix] += fact_nm1 * (-std::expm1(-p * xs[ix])) * std::pow(phi_xmax, n);
        }
        const double closure = fact_nm1 * std::pow(phi_xmax, n);
        const double envelope = n * fact_nm1 * std::pow(ints.full, n - 1) *
                                    (std::isfinite(ints.wp_inf) ? ints.wp_inf : 0.0) *
                                    ints.om_tail +
                                static_cast<double>(n) * ints.full * prev.tail_bound;
        cur.tail_bound = phi ? std::min(closure, envelope) +
                                   static_cast<double>(n) * ints.full * prev.tail_bound
                             : envelope;
        tables.push_back(std::move(cur));
    }
    return tables;
}

// E_x(e^{q T_inf^+}; T_inf^+ < T_0^-) = sum q^n m_n(x) / n!, radius 1/int(omega W_p).
struct ExpMomentResult {
    double value = 0.0;
    double remainder_bound = 0.0;
    int terms = 0;
    double radius = 0.0;
};

inline ExpMomentResult exp_moment(const LevyModel& model, const RateFunction& rate, double q,
                                  double x, MomentOptions opt = {}) {
    if (!(model.p() > 0)) throw precondition_error("p>0", "exp_moment needs p > 0");
    ScaleOptions so = opt.scale;
    so.cache_hi = std::max(so.cache_hi, opt.x_max + 1.0);
    const ScaleFunction W(model, 0.0, so);
    const auto ints = detail::omega_wp_integrals(W, rate, opt.x_max);
    ExpMomentResult out;
    out.radius = 1.0 / ints.full;
    const double r = std::abs(q) * ints.full;
    if (!(r < 1.0))
        throw domain_error("exp_moment: |q| = " + std::to_string(std::abs(q)) +
                           " outside the convergence radius " + std::to_string(out.radius));
    // terms needed for a geometric remainder below 1e-12 (capped)
    int n_terms = 1;
    while (std::pow(r, n_terms + 1) / (1.0 - r) > 1e-12 && n_terms < 60) ++n_terms;
    const auto tables = moment_recursion(model, rate, n_terms, opt);
    // x sits on the grid up to interpolation
    const double h = tables[0].x[1] - tables[0].x[0];
    const auto i = std::min(static_cast<std::size_t>(x / h), tables[0].x.size() - 2);
    const double t = x / h - static_cast<double>(i);
    double qn = 1.0;
    for (int n = 0; n <= n_terms; ++n) {
        const double mn = (1 - t) * tables[n].m[i] + t * tables[n].m[i + 1];
        out.value += qn * mn / detail::factorial(n);
        qn *= q;
    }
    out.terms = n_terms;
    out.remainder_bound = std::pow(r, n_terms + 1) / (1.0 - r);
    return out;
}

// ---------------------------------------------------------------------------
// Regime classification: the H2 index plus the side conditions the limit
// laws need (bounded second tail moment in regime B; a strict phi-ratio
// separation for the regime-A speed statement).
// ---------------------------------------------------------------------------

struct SideCondition {
    TriState status = TriState::inconclusive;
    double value = 0.0;  // limiting constant where one exists
};

struct RegimeReport {
    bool conclusive = false;
    double lambda = 0.0;
    bool lambda_exact = false;
    double lambda_spread = 0.0;
    char regime = '?';           // 'A' (lambda = 0) or 'B' (lambda > 0)
    SideCondition clock_second_moment;        // limsup phi^{-2} int_x^inf R^{-2} < inf
    SideCondition phi_ratio_separation;        // liminf phi(y)/phi(hy) > 1 for every h > 1
};

inline RegimeReport estimate_lambda(const RateFunction& rate, double gamma) {
    RegimeReport rep;
    const LambdaEstimate le = estimate_h2_lambda(rate, gamma);
    if (!le.value) return rep;  // inconclusive is a valid outcome
    rep.conclusive = true;
    rep.lambda = *le.value;
    rep.lambda_exact = le.exact;
    rep.lambda_spread = le.spread;
    rep.regime = rep.lambda > 0 ? 'B' : 'A';

    PhiFunction phi(rate, gamma);
    // regime-B side condition: limsup gamma^2 int_x 1/R^2 / (int_x 1/R)^2
    if (const auto* e = std::get_if<ExponentialRate>(&rate.variant_of())) {
        rep.clock_second_moment = {TriState::yes, gamma * gamma * e->lambda / 2.0};
    } else if (std::holds_alternative<PowerRate>(rate.variant_of())) {
        rep.clock_second_moment = {TriState::yes, 0.0};  // ratio ~ C / x -> 0
    } else {
        double last = 0.0, prev = 0.0;
        bool bounded = true;
        for (double y : {8.0, 16.0, 32.0, 64.0, 128.0}) {
            const TailIntegral sq = rate.inv_tail(y, 2);
            const TailIntegral ti = rate.inv_tail(y, 1);
            if (sq.status != TailStatus::converged || ti.status != TailStatus::converged) {
                bounded = false;
                break;
            }
            prev = last;
            last = sq.value / (ti.value * ti.value) * gamma * gamma;
        }
        if (bounded && last <= 2.0 * prev + 1.0)
            rep.clock_second_moment = {TriState::yes, last};
        else
            rep.clock_second_moment = {bounded ? TriState::inconclusive : TriState::no, last};
    }
    // regime-A speed side condition, binding at small h
    double min_ratio = kInf;
    for (double hh : {1.25, 2.0, 4.0}) {
        double lim = kInf;
        for (double y : {32.0, 64.0, 128.0, 256.0}) lim = std::min(lim, phi(y) / phi(hh * y));
        min_ratio = std::min(min_ratio, lim);
    }
    rep.phi_ratio_separation.value = min_ratio;
    rep.phi_ratio_separation.status = min_ratio > 1.02 ? TriState::yes
                        : min_ratio < 1.0 ? TriState::no
                                          : TriState::inconclusive;
    return rep;
}

inline double regime_rel_factor(const RegimeReport& rep) {
    return rep.regime == 'A' ? 0.25 : 1.0;
}

// ---------------------------------------------------------------------------
// Reference sampler for the regime-B limit law: lambda gamma int e^{-lambda xi}
// along the free path from 0, plus overshoots at a high reference level.
// The free (unconditioned) process is used: the conditioning to stay above
// the floor vanishes from any fixed level as the level grows, at rate e^{-pz}.
// ---------------------------------------------------------------------------

struct LimitLawSamples {
    std::vector<double> clock;      // samples of lambda gamma int_0^inf e^{-lambda xi_t} dt
    std::vector<double> overshoot;  // xi(tau_{x_ref}^+) - x_ref
    std::uint64_t rejected = 0;     // per-sample tail bound above tolerance
    double tail_tol = 0.0;
};

struct LimitLawOptions {
    double x_ref = 30.0;
    double tail_tol = 1e-8;
    double dt = 0.01;
    double t_max = 2e4;
};

inline LimitLawSamples sample_limit_law_B(const LevyModel& model, double lambda,
                                          std::uint64_t n, std::uint64_t seed,
                                          LimitLawOptions opt = {}) {
    if (!(lambda > 0)) throw domain_error("sample_limit_law_B: lambda > 0 required");
    const double gamma = model.gamma();
    if (!(gamma > 0) || !std::isfinite(gamma))
        throw unsupported_model_error("sample_limit_law_B: gamma in (0, inf) required");
    LimitLawSamples out;
    out.tail_tol = opt.tail_tol;
    const double x_cut = std::max(opt.x_ref, (-std::log(opt.tail_tol) + 2.0) / lambda);
    const auto& jumps = model.jumps();
    const bool has_jumps = !jumps.trivial();
    const double jump_rate = has_jumps ? jumps.rate_above(0.0) : 0.0;
    const double drift = has_jumps ? model.mu_eff() : model.mu();
    const double gauss_var = model.sigma2_total();
    const double dt = opt.dt;
    const double sig_dt = std::sqrt(gauss_var * dt);
    out.clock.reserve(n);
    out.overshoot.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        rng::Stream stream(seed, i);
        double t = 0.0, xi = 0.0, acc = 0.0;
        double f_old = 1.0;  // e^{-lambda xi_0}
        bool crossed_ref = false, reached_cut = false;
        while (t < opt.t_max) {
            double jump_sum = 0.0;
            if (jump_rate > 0) {
                const std::uint64_t nj = stream.next_poisson(jump_rate * dt);
                for (std::uint64_t k = 0; k < nj; ++k)
                    jump_sum += jumps.sample_size(0.0, stream);
            }
            const double cont_end = xi + drift * dt + sig_dt * stream.next_normal();
            const double xi_new = cont_end + jump_sum;
            const double f_new = std::exp(-lambda * xi_new);
            acc += dt * 0.5 * (f_old + f_new);
            t += dt;
            if (!crossed_ref && xi_new > opt.x_ref) {
                crossed_ref = true;
                // jump-driven crossings carry the overshoot; continuous ones creep
                out.overshoot.push_back(cont_end <= opt.x_ref ? xi_new - opt.x_ref : 0.0);
            }
            xi = xi_new;
            f_old = f_new;
            if (xi >= x_cut) {
                reached_cut = true;
                break;
            }
        }
        // envelope with the LLN slope gamma (paths grow like gamma t past the cut)
        const double tail_bound = 2.0 * std::exp(-lambda * xi) / (lambda * gamma);
        if (!reached_cut || tail_bound > opt.tail_tol * std::max(acc, 1e-12)) {
            ++out.rejected;
            if (crossed_ref) out.overshoot.pop_back();
            continue;
        }
        out.clock.push_back(lambda * gamma * acc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Small stats helpers
// ---------------------------------------------------------------------------

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw domain_error("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) throw domain_error("quantile of empty sample");
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double t = pos - static_cast<double>(i);
    return (1 - t) * v[i] + t * v[i + 1];
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

// ---------------------------------------------------------------------------
// Residual-time verification: distribution of T_inf - T_x^+ after upcrossing
// each level, conditioned on explosion by rejection. Regime A checks
// concentration of the phi(x)-rescaled residual at 1; regime B compares the
// phi(X(T_x^+))-rescaled residual to the reference limit law by KS distance.
// ---------------------------------------------------------------------------

struct Thm1LevelRow {
    double level = 0.0;
    std::uint64_t n = 0;
    double mean_ratio = 0.0;
    double sd_ratio = 0.0;
    double p_outside_025 = 0.0;   // P(|ratio - 1| > 0.25), the concentration statistic
    double ks_reference = -1.0;   // regime B: residual ratio vs the clock law
    double mean_phi_ratio = 0.0;  // regime B: mean of phi(X(T_x^+))/phi(x)
    double ks_phi_reference = -1.0;   // regime B: phi ratio vs e^{-lambda rho}
    double ks_prod_reference = -1.0;  // regime B: residual/phi(x) vs the product law
};

struct Thm1Result {
    char regime = '?';
    std::vector<Thm1LevelRow> rows;
    std::uint64_t total_paths = 0;
    std::uint64_t accepted = 0;
    double acceptance_rate = 0.0;
    double conditioning_bias_bound = 0.0;
    bool empty = false;
    std::vector<std::vector<double>> ratios;  // per level, the conditioned samples
    std::vector<double> reference;            // regime B reference clock samples
    std::vector<double> reference_overshoot;  // regime B reference rho samples
    double lambda = 0.0;
};

struct VerifyOptions {
    std::uint64_t n_accept = 2000;
    int threads = 1;
    std::uint64_t max_batches = 64;
};

inline Thm1Result verify_thm1(const LevyModel& model, const RateFunction& rate,
                              const std::vector<double>& levels, const SimConfig& cfg,
                              double start, VerifyOptions vopt = {}) {
    Thm1Result out;
    const BoundaryClassification cls = classify_boundaries(model, rate);
    if (cls.explosion != TriState::yes) {
        out.empty = true;  // no exploding paths: empty-table report
        return out;
    }
    const RegimeReport reg = estimate_lambda(rate, model.gamma());
    if (!reg.conclusive)
        throw precondition_error("H2", "verify_thm1: regime (lambda) could not be determined");
    out.regime = reg.regime;
    out.lambda = reg.lambda;
    PhiFunction phi(rate, model.gamma());
    PathEngine eng(model, rate, cfg, phi);
    std::vector<double> lv = levels;
    std::sort(lv.begin(), lv.end());
    out.ratios.assign(lv.size(), {});
    std::vector<std::vector<double>> phi_ratios(lv.size());
    std::vector<std::vector<double>> direct_ratios(lv.size());

    std::uint64_t next_path = 0;
    for (std::uint64_t batch = 0; batch < vopt.max_batches && out.accepted < vopt.n_accept;
         ++batch) {
        const std::uint64_t need = vopt.n_accept - out.accepted;
        const double rate_guess = out.total_paths > 0
                                      ? std::max(0.05, static_cast<double>(out.accepted) /
                                                           out.total_paths)
                                      : 0.5;
        const auto n_batch =
            static_cast<std::uint64_t>(std::ceil(static_cast<double>(need) / rate_guess * 1.15)) +
            8;
        struct Row {
            bool ok = false;
            std::vector<double> res, pr;
        };
        std::vector<Row> rows(n_batch);
        auto worker = [&](std::uint64_t lo, std::uint64_t hi) {
            for (std::uint64_t k = lo; k < hi; ++k) {
                RunResult r =
                    eng.run(start, rng::Stream(cfg.seed, next_path + k), lv, NullObserver{});
                if (r.end != PathEnd::stop) continue;
                Row& row = rows[k];
                row.ok = true;
                const double tail = phi(r.stop_hit.xi);
                row.res.resize(lv.size());
                row.pr.resize(lv.size());
                for (std::size_t i = 0; i < lv.size(); ++i) {
                    const double residual = r.hits[i].residual + tail;
                    row.res[i] = residual;
                    row.pr[i] = r.hits[i].xi;
                }
            }
        };
        if (vopt.threads <= 1) {
            worker(0, n_batch);
        } else {
            std::vector<std::future<void>> futs;
            const std::uint64_t chunk = (n_batch + vopt.threads - 1) / vopt.threads;
            for (int k = 0; k < vopt.threads; ++k) {
                const std::uint64_t lo = k * chunk;
                if (lo >= n_batch) break;
                futs.push_back(std::async(std::launch::async, worker, lo,
                                          std::min<std::uint64_t>(n_batch, lo + chunk)));
            }
            for (auto& f : futs) f.get();
        }
        for (std::uint64_t k = 0; k < n_batch; ++k) {
            ++out.total_paths;
            if (!rows[k].ok) continue;
            if (out.accepted >= vopt.n_accept) break;
            ++out.accepted;
            for (std::size_t i = 0; i < lv.size(); ++i) {
                const double x = lv[i];
                if (reg.regime == 'A') {
                    out.ratios[i].push_back(rows[k].res[i] / phi(x));
                } else {
                    out.ratios[i].push_back(rows[k].res[i] / phi(rows[k].pr[i]));
                    phi_ratios[i].push_back(phi(rows[k].pr[i]) / phi(x));
                    direct_ratios[i].push_back(rows[k].res[i] / phi(x));
                }
            }
        }
        next_path += n_batch;
    }
    out.acceptance_rate = out.total_paths > 0
                              ? static_cast<double>(out.accepted) / out.total_paths
                              : 0.0;
    out.conditioning_bias_bound = cfg.x_stop > 0 ? std::exp(-model.p() * cfg.x_stop) : 0.0;
    if (out.accepted == 0) {
        out.empty = true;
        return out;
    }
    if (reg.regime == 'B') {
        LimitLawOptions lo;
        lo.x_ref = lv.back();
        lo.dt = cfg.dt;
        const auto ref = sample_limit_law_B(model, reg.lambda, vopt.n_accept, cfg.seed + 1, lo);
        out.reference = ref.clock;
        out.reference_overshoot = ref.overshoot;
    }
    for (std::size_t i = 0; i < lv.size(); ++i) {
        Thm1LevelRow row;
        row.level = lv[i];
        row.n = out.ratios[i].size();
        const auto& v = out.ratios[i];
        double s = 0, s2 = 0, out025 = 0;
        for (double r : v) {
            s += r;
            s2 += r * r;
            if (std::abs(r - 1.0) > 0.25) out025 += 1.0;
        }
        row.mean_ratio = s / row.n;
        row.sd_ratio = std::sqrt(std::max(0.0, s2 / row.n - row.mean_ratio * row.mean_ratio));
        row.p_outside_025 = out025 / row.n;
        if (reg.regime == 'B' && !out.reference.empty()) {
            row.ks_reference = ks_distance(v, out.reference);
            double sp = 0;
            for (double r : phi_ratios[i]) sp += r;
            row.mean_phi_ratio = sp / phi_ratios[i].size();
            if (!out.reference_overshoot.empty()) {
                std::vector<double> phi_ref, prod_ref;
                const std::size_t m =
                    std::min(out.reference.size(), out.reference_overshoot.size());
                for (std::size_t k = 0; k < m; ++k) {
                    const double e = std::exp(-reg.lambda * out.reference_overshoot[k]);
                    phi_ref.push_back(e);
                    prod_ref.push_back(e * out.reference[k]);  // independent pair
                }
                row.ks_phi_reference = ks_distance(phi_ratios[i], phi_ref);
                row.ks_prod_reference = ks_distance(direct_ratios[i], prod_ref);
            }
        }
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Speed-of-explosion verification: per exploding path, read X(T_inf - t) for
// each t in the grid (two passes over the same stream: the first finds T_inf,
// the replay extracts positions; counter-based streams make the paths
// identical). The ratio target is phi^{-1}(t) in regime A and -log(t)/lambda
// in regime B; the running-infimum variant is reported alongside.
// ---------------------------------------------------------------------------

struct Thm2Row {
    double t = 0.0;
    std::uint64_t n = 0;
    std::uint64_t excluded = 0;
    double median_ratio = 0.0;
    double q25 = 0.0, q75 = 0.0;
    double median_inf_ratio = 0.0;
};

struct Thm2Result {
    char regime = '?';
    std::vector<Thm2Row> rows;
    std::uint64_t total_paths = 0;
    std::uint64_t accepted = 0;
    bool empty = false;
};

inline Thm2Result verify_thm2(const LevyModel& model, const RateFunction& rate,
                              const std::vector<double>& t_grid, const SimConfig& cfg,
                              double start, VerifyOptions vopt = {}) {
    Thm2Result out;
    const BoundaryClassification cls = classify_boundaries(model, rate);
    if (cls.explosion != TriState::yes) {
        out.empty = true;
        return out;
    }
    const RegimeReport reg = estimate_lambda(rate, model.gamma());
    if (!reg.conclusive)
        throw precondition_error("H2", "verify_thm2: regime (lambda) could not be determined");
    if (reg.regime == 'A' && reg.phi_ratio_separation.status == TriState::no)
        throw precondition_error("phi-ratio separation",
                                 "regime A speed statement needs liminf phi(y)/phi(hy) > 1");
    out.regime = reg.regime;
    PhiFunction phi(rate, model.gamma());
    PathEngine eng(model, rate, cfg, phi);
    std::vector<double> ts = t_grid;
    std::sort(ts.begin(), ts.end(), std::greater<>());  // descending t = ascending eta target
    std::vector<std::vector<double>> ratios(ts.size());
    std::vector<std::vector<double>> inf_ratios(ts.size());
    std::vector<std::uint64_t> excluded(ts.size(), 0);

    std::uint64_t path = 0;
    std::uint64_t guard = 0;
    while (out.accepted < vopt.n_accept && guard++ < vopt.n_accept * 40) {
        const std::uint64_t id = path++;
        RunResult r = eng.run(start, rng::Stream(cfg.seed, id), {}, NullObserver{});
        ++out.total_paths;
        if (r.end != PathEnd::stop) continue;
        ++out.accepted;
        const double tail = phi(r.stop_hit.xi);
        const double t_inf = r.stop_hit.eta + tail;
        // eta targets, ascending; t below the tail estimate cannot be resolved
        std::vector<double> targets;
        targets.reserve(ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (ts[i] <= tail * 1.05) {
                ++excluded[i];
                targets.push_back(kInf);  // placeholder, never reached
            } else {
                targets.push_back(t_inf - ts[i]);
            }
        }
        struct Capture {
            std::vector<double> x, xinf;
            std::vector<char> got;
            const std::vector<double>* targets;
            std::size_t k = 0;
            void operator()(double, double xi, double eta) {
                while (k < targets->size() && eta >= (*targets)[k]) {
                    x[k] = xi;
                    xinf[k] = xi;
                    got[k] = 1;
                    ++k;
                }
                for (std::size_t j = 0; j < k; ++j)
                    if (got[j]) xinf[j] = std::min(xinf[j], xi);
            }
        } cap;
        cap.x.assign(ts.size(), 0.0);
        cap.xinf.assign(ts.size(), 0.0);
        cap.got.assign(ts.size(), 0);
        cap.targets = &targets;
        eng.run(start, rng::Stream(cfg.seed, id), {}, cap);  // replay
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (!cap.got[i]) continue;
            const double t = ts[i];
            const double denom = reg.regime == 'A' ? phi.inverse(t) : (-std::log(t) / reg.lambda);
            if (!(denom > 0)) {
                ++excluded[i];
                continue;
            }
            ratios[i].push_back(cap.x[i] / denom);
            inf_ratios[i].push_back(cap.xinf[i] / denom);
        }
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Thm2Row row;
        row.t = ts[i];
        row.n = ratios[i].size();
        row.excluded = excluded[i];
        if (!ratios[i].empty()) {
            auto v = ratios[i];
            std::sort(v.begin(), v.end());
            row.median_ratio = quantile_sorted(v, 0.5);
            row.q25 = quantile_sorted(v, 0.25);
            row.q75 = quantile_sorted(v, 0.75);
            row.median_inf_ratio = median(inf_ratios[i]);
        }
        out.rows.push_back(row);
    }
    std::reverse(out.rows.begin(), out.rows.end());  // ascending t for reporting
    return out;
}

// ---------------------------------------------------------------------------
// Tail-integral asymptotics for f = omega: exponentially weighted tail
// integrals in the two regimes, and the inverse of the tail integral against
// its -log(x)/lambda asymptote.
// ---------------------------------------------------------------------------

struct Prop46Row {
    std::string which;
    double x = 0.0;
    double ratio = 0.0;
};

inline std::vector<Prop46Row> prop46_checks(const RateFunction& rate, double gamma,
                                            double alpha, std::vector<double> xs = {}) {
    const LambdaEstimate le = estimate_h2_lambda(rate, gamma);
    if (!le.value) throw precondition_error("H2", "prop46: lambda could not be determined");
    const double lambda = *le.value;
    if (!(alpha > 0)) throw domain_error("prop46: alpha must be > 0");
    std::vector<Prop46Row> rows;
    auto tail = [&](double x) { return rate.inv_tail(x).value; };
    if (lambda == 0.0) {
        if (xs.empty()) xs = {10.0, 100.0, 1000.0};
        for (double x : xs) {
            // e^{-ax} int_1^x e^{ay} w(y) dy = int_0^{x-1} e^{-az} w(x-z) dz
            const double zmax = std::min(x - 1.0, 60.0 / alpha);
            const double num =
                integrate([&](double z) { return std::exp(-alpha * z) * rate.omega(x - z); },
                          0.0, zmax);
            rows.push_back({"a", x, num / tail(x)});
        }
        return rows;
    }
    if (!(alpha < lambda))
        throw domain_error("prop46 case (b): alpha must lie in (0, lambda)");
    if (xs.empty()) xs = {5.0, 10.0, 20.0};
    for (double x : xs) {
        const double zmax = 80.0 / (lambda - alpha);
        // normalize the integrands to O(1) so the relative tolerance drives
        const double om_x = rate.omega(x);
        const double tail_x = tail(x);
        const double i1 = om_x * integrate([&](double z) {
            return std::exp(alpha * z) * rate.omega(x + z) / om_x;
        }, 0.0, zmax);
        const double i2 = tail_x * integrate([&](double z) {
            return std::exp(alpha * z) * tail(x + z) / tail_x;
        }, 0.0, zmax);
        rows.push_back({"b1", x, lambda * i2 / i1});
        rows.push_back({"b2", x, (lambda - alpha) * i1 / (lambda * tail_x)});
    }
    // case (c): the inverse k of the tail integral satisfies k(u) ~ -log(u)/lambda
    PhiFunction phi(rate, gamma);
    for (double u : {1e-2, 1e-4, 1e-6}) {
        const double k = phi.inverse(u / gamma);
        rows.push_back({"c", u, k / (-std::log(u) / lambda)});
    }
    return rows;
}

}  // namespace lamperti
