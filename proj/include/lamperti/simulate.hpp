#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lamperti/errors.hpp"
#include "lamperti/levy_model.hpp"
#include "lamperti/rate_function.hpp"
#include "lamperti/rng.hpp"

namespace lamperti {

// ---------------------------------------------------------------------------
// SimConfig: Euler scheme controls. Small jumps below epsilon are folded into
// the Gaussian part (Asmussen-Rosinski), downward passages get a Brownian
// bridge crossing correction, and every path owns the counter-based stream
// (seed, path index), so experiments replay bit-identically.
// ---------------------------------------------------------------------------

struct SimConfig {
    double dt = 1e-3;
    double epsilon = 0.0;    // extra small-jump truncation; 0 keeps the measure's own floor
    double x_stop = 0.0;     // 0 = adaptive explosion handoff (needs phi), else fixed level
    double c_floor = 1e-3;   // absorption level approximating 0; -inf disables
    double t_max = 1e4;
    std::uint64_t seed = 1;
    std::uint64_t replicates = 2;
    bool bridge_correction = true;
    double stop_tail_rel = 1e-4;  // adaptive handoff: stop once phi(xi) <= rel * eta
};

enum class PathEnd { floor, stop, censored };

struct LevelHit {
    double level = 0.0;
    double t = 0.0;
    double xi = 0.0;        // position at crossing (jump overshoot included)
    double eta = 0.0;       // eta at crossing
    double residual = 0.0;  // eta accumulated after the crossing, to path end
    bool hit = false;
};

struct RunResult {
    PathEnd end = PathEnd::censored;
    double t_end = 0.0, xi_end = 0.0, eta_end = 0.0, xi_max = 0.0;
    double floor_undershoot = 0.0;
    std::vector<LevelHit> hits;  // one entry per requested level, ascending
    LevelHit stop_hit;           // valid when end == stop
    std::uint64_t steps = 0;
};

struct NullObserver {
    void operator()(double, double, double) {}
};

class PathEngine {
public:
    PathEngine(LevyModel model, RateFunction rate, const SimConfig& cfg,
               std::optional<PhiFunction> phi = std::nullopt)
        : model_(std::move(model)), rate_(std::move(rate)), cfg_(cfg), phi_(std::move(phi)) {
        if (!(cfg_.dt > 0) || !(cfg_.t_max > 0)) throw domain_error("sim config: dt, t_max > 0");
        const auto& j = model_.jumps();
        eps_ = cfg_.epsilon;
        if (!j.trivial()) {
            jump_rate_ = j.rate_above(eps_);
            // mean of the dropped small jumps goes back into the drift,
            // their second moment into the Gaussian part
            drift_ = model_.mu_eff() + j.x1_below(eps_);
            gauss_var_ = model_.sigma2_total() + j.x2_below(eps_);
        } else {
            drift_ = model_.mu();
            gauss_var_ = model_.sigma2_total();
        }
        if (cfg_.x_stop == 0.0 && !phi_ && cfg_.t_max == kInf)
            throw domain_error("sim config: need x_stop, phi, or a finite t_max");
        if (std::isfinite(cfg_.c_floor)) {
            try {
                om_floor_ = rate_.omega(cfg_.c_floor);
            } catch (const domain_error&) {
                throw domain_error("sim config: c_floor must be positive where R(0+) = 0");
            }
        }
    }

    double drift() const { return drift_; }
    double gauss_var() const { return gauss_var_; }
    double jump_rate() const { return jump_rate_; }
    const SimConfig& config() const { return cfg_; }
    const LevyModel& model() const { return model_; }
    const RateFunction& rate() const { return rate_; }
    const std::optional<PhiFunction>& phi() const { return phi_; }

    template <class Obs>
    RunResult run(double start, rng::Stream stream, const std::vector<double>& levels,
                  Obs&& obs) const {
        if (std::isfinite(cfg_.c_floor) && !(start > cfg_.c_floor))
            throw domain_error("run: start must exceed c_floor");
        RunResult out;
        out.hits.resize(levels.size());
        for (std::size_t i = 0; i < levels.size(); ++i) out.hits[i].level = levels[i];
        const double dt = cfg_.dt;
        const double sig_dt = std::sqrt(gauss_var_ * dt);
        const double drift_dt = drift_ * dt;
        const double lam_dt = jump_rate_ * dt;
        double t = 0.0, xi = start, eta = 0.0, xi_max = start;
        double om_old = rate_.omega(xi);
        std::size_t cursor = 0;
        while (cursor < levels.size() && start > levels[cursor]) {
            auto& h = out.hits[cursor];
            h.hit = true;
            h.t = 0.0;
            h.xi = start;
            h.eta = 0.0;
            ++cursor;
        }
        obs(t, xi, eta);
        const bool floor_active = std::isfinite(cfg_.c_floor);
        while (t < cfg_.t_max) {
            ++out.steps;
            double jump_sum = 0.0;
            if (lam_dt > 0.0) {
                const std::uint64_t nj = stream.next_poisson(lam_dt);
                for (std::uint64_t k = 0; k < nj; ++k)
                    jump_sum += model_.jumps().sample_size(eps_, stream);
            }
            const double z = stream.next_normal();
            const double cont_end = xi + drift_dt + sig_dt * z;

            // downward passage of the continuous part
            if (floor_active) {
                bool crossed = false;
                double frac = 1.0;
                if (cont_end <= cfg_.c_floor) {
                    crossed = true;
                    const double den = xi - cont_end;
                    frac = den > 0 ? (xi - cfg_.c_floor) / den : 1.0;
                    out.floor_undershoot = cfg_.c_floor - cont_end;
                } else if (cfg_.bridge_correction && gauss_var_ > 0 && xi > cfg_.c_floor) {
                    const double pb = std::exp(-2.0 * (xi - cfg_.c_floor) *
                                               (cont_end - cfg_.c_floor) / (gauss_var_ * dt));
                    if (stream.next_double() < pb) {
                        crossed = true;
                        frac = (xi - cfg_.c_floor) /
                               ((xi - cfg_.c_floor) + (cont_end - cfg_.c_floor));
                        out.floor_undershoot = 0.0;  // absorbed exactly at the level
                    }
                }
                if (crossed) {
                    const double inc = frac * dt * 0.5 * (om_old + om_floor_);
                    eta += inc;
                    for (std::size_t i = 0; i < cursor; ++i) out.hits[i].residual += inc;
                    t += frac * dt;
                    out.end = PathEnd::floor;
                    out.t_end = t;
                    out.xi_end = cfg_.c_floor;
                    out.eta_end = eta;
                    out.xi_max = xi_max;
                    obs(t, cfg_.c_floor, eta);
                    return out;
                }
            }

            const double xi_new = cont_end + jump_sum;
            const double om_new = rate_.omega(xi_new);
            const double inc = dt * 0.5 * (om_old + om_new);
            const double t_new = t + dt;
            const std::size_t open_before = cursor;  // hits from earlier steps

            // upward level crossings: continuous crossings creep (position =
            // level, eta interpolated), jump crossings carry the overshoot
            while (cursor < levels.size() && xi_new > levels[cursor]) {
                auto& h = out.hits[cursor];
                h.hit = true;
                if (cont_end > levels[cursor] && gauss_var_ + std::abs(drift_dt) > 0) {
                    const double den = cont_end - xi;
                    const double fr = den > 0 ? std::clamp((levels[cursor] - xi) / den, 0.0, 1.0)
                                              : 1.0;
                    h.t = t + fr * dt;
                    h.xi = levels[cursor];
                    const double om_lvl = rate_.omega(levels[cursor]);
                    h.eta = eta + fr * dt * 0.5 * (om_old + om_lvl);
                    h.residual = (eta + inc) - h.eta;  // remainder of this step
                } else {
                    h.t = t_new;
                    h.xi = xi_new;
                    h.eta = eta + inc;
                    h.residual = 0.0;
                }
                ++cursor;
            }

            eta += inc;
            for (std::size_t i = 0; i < open_before; ++i) out.hits[i].residual += inc;
            t = t_new;
            xi = xi_new;
            om_old = om_new;
            xi_max = std::max(xi_max, xi);
            obs(t, xi, eta);

            // explosion handoff
            bool stop_now = false;
            if (cfg_.x_stop > 0.0 && xi >= cfg_.x_stop) stop_now = true;
            if (cfg_.x_stop == 0.0 && phi_ && eta > 0) {
                if ((*phi_)(std::max(xi, 1e-12)) <= cfg_.stop_tail_rel * eta &&
                    cursor == levels.size())
                    stop_now = true;
            }
            if (stop_now) {
                out.end = PathEnd::stop;
                out.t_end = t;
                out.xi_end = xi;
                out.eta_end = eta;
                out.xi_max = xi_max;
                out.stop_hit = {cfg_.x_stop > 0 ? cfg_.x_stop : xi, t, xi, eta, 0.0, true};
                return out;
            }
        }
        out.end = PathEnd::censored;
        out.t_end = t;
        out.xi_end = xi;
        out.eta_end = eta;
        out.xi_max = xi_max;
        return out;
    }

private:
    LevyModel model_;
    RateFunction rate_;
    SimConfig cfg_;
    std::optional<PhiFunction> phi_;
    double eps_ = 0.0;
    double jump_rate_ = 0.0;
    double drift_ = 0.0;
    double gauss_var_ = 0.0;
    double om_floor_ = 0.0;
};

// ---------------------------------------------------------------------------
// PathRecord: full trajectory for diagnostics and the Lamperti transform.
// ---------------------------------------------------------------------------

struct PathRecord {
    std::vector<double> t, xi, xi_max, eta;
    RunResult result;
};

enum class OutcomeKind { extinct, extinguished, exploded, drifts_to_infinity, censored };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::extinct: return "extinct";
        case OutcomeKind::extinguished: return "extinguished";
        case OutcomeKind::exploded: return "exploded";
        case OutcomeKind::drifts_to_infinity: return "drifts-to-infinity";
        default: return "censored";
    }
}

struct SimOutcome {
    OutcomeKind kind = OutcomeKind::censored;
    double absorption_time = kInf;  // T_0^- or T_inf^+ estimate
    double t_inf_estimate = kInf;
    double tail_estimate = 0.0;
    double bias_bound = 0.0;
    std::string note;
};

struct ExplosionTail {
    double t_inf = kInf;
    double tail = 0.0;
    double bias_bound = 0.0;
};

// T_inf estimate = eta(tau_stop) + phi(xi at stop); the added tail is the
// first-moment asymptotic of the residual. The bias bound combines the regime
// spread factor (A: ratio concentrates at 1, B: O(1) law) with a one-step
// eta envelope for the grid error.
inline ExplosionTail estimate_explosion_time(const RunResult& run, const PhiFunction& phi,
                                             const RateFunction& rate, double dt,
                                             double regime_rel_factor) {
    if (run.end != PathEnd::stop)
        throw domain_error("estimate_explosion_time: path did not reach the handoff level");
    ExplosionTail out;
    out.tail = phi(run.stop_hit.xi);
    out.t_inf = run.stop_hit.eta + out.tail;
    out.bias_bound =
        std::max(regime_rel_factor * out.tail, dt * rate.omega(run.stop_hit.xi));
    return out;
}

// Classify a finished path. Extinct/extinguished split and the H0 gate come
// from the analytic integral tests, not from the finite path.
inline SimOutcome classify_outcome(const RunResult& run, const RateFunction& rate,
                                   const SimConfig& cfg,
                                   const std::optional<PhiFunction>& phi,
                                   TriState extinction, TriState h0,
                                   double regime_rel_factor = 1.0) {
    SimOutcome out;
    switch (run.end) {
        case PathEnd::floor: {
            if (extinction == TriState::no) {
                out.kind = OutcomeKind::extinguished;
                out.note = "xi hit the floor but int_{0+} W/R = inf: eta(tau_0^-) = inf";
            } else {
                out.kind = OutcomeKind::extinct;
                out.absorption_time = run.eta_end;
                if (extinction == TriState::inconclusive)
                    out.note = "extinction integral test inconclusive";
            }
            return out;
        }
        case PathEnd::stop: {
            if (h0 == TriState::yes && phi) {
                out.kind = OutcomeKind::exploded;
                const auto tail = estimate_explosion_time(run, *phi, rate, cfg.dt,
                                                          regime_rel_factor);
                out.t_inf_estimate = tail.t_inf;
                out.absorption_time = tail.t_inf;
                out.tail_estimate = tail.tail;
                out.bias_bound = tail.bias_bound;
            } else {
                out.kind = OutcomeKind::drifts_to_infinity;
                out.note = "reached the stop level without H0: eta(inf) = inf";
            }
            return out;
        }
        default:
            out.kind = OutcomeKind::censored;
            return out;
    }
}

// Record a full path on the grid (diagnostic use; memory is t_max/dt points).
inline PathRecord simulate_path(const LevyModel& model, const RateFunction& rate,
                                const SimConfig& cfg, double start,
                                const std::vector<double>& levels = {},
                                std::optional<PhiFunction> phi = std::nullopt,
                                std::uint64_t path_id = 0) {
    if (cfg.t_max / cfg.dt > 2.2e7)
        throw domain_error("simulate_path: t_max/dt too large for full recording");
    PathEngine eng(model, rate, cfg, std::move(phi));
    PathRecord rec;
    double running_max = start;
    auto obs = [&](double t, double x, double e) {
        running_max = std::max(running_max, x);
        rec.t.push_back(t);
        rec.xi.push_back(x);
        rec.xi_max.push_back(running_max);
        rec.eta.push_back(e);
    };
    rec.result = eng.run(start, rng::Stream(cfg.seed, path_id), levels, obs);
    return rec;
}

// ---------------------------------------------------------------------------
// Lamperti transform of a recorded path: X(eta(t)) = xi(t), i.e. the pairs
// (eta_k, xi_k) are the time-changed trajectory. Passage times transfer
// exactly on the grid by construction.
// ---------------------------------------------------------------------------

struct TimeChangedPath {
    std::vector<double> t;  // eta values
    std::vector<double> x;  // xi values
};

inline TimeChangedPath lamperti_transform(const PathRecord& rec) {
    TimeChangedPath out;
    out.t = rec.eta;
    out.x = rec.xi;
    for (std::size_t i = 1; i < out.t.size(); ++i)
        if (!(out.t[i] > out.t[i - 1]))
            throw numeric_error("lamperti_transform: eta is not strictly increasing (omega "
                                "must be positive)");
    return out;
}

// min over t >= t0 of xi_t / max(xi)_t; tends to 1 when p > 0 (the process
// stays close to its running maximum at high levels).
inline double running_max_ratio_check(const PathRecord& rec, double t0) {
    double best = kInf;
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        if (rec.t[i] < t0 || rec.xi_max[i] <= 0) continue;
        best = std::min(best, rec.xi[i] / rec.xi_max[i]);
    }
    if (!std::isfinite(best)) throw domain_error("running_max_ratio_check: path too short");
    return best;
}

// ---------------------------------------------------------------------------
// Monte Carlo driver: independent paths with per-path streams, merged in path
// order (deterministic under any thread count).
// ---------------------------------------------------------------------------

enum class EstimatorKind {
    hit_floor_prob,       // 1(floor before stop / censor)
    weighted_exit,        // e^{-eta(tau_floor)} 1(floor first)
    explosion_prob,       // 1(reached the stop level)
    eta_restricted_mean,  // T_inf estimate * 1(reached stop)   [needs phi]
};

struct EstimatorSpec {
    std::string name;
    EstimatorKind kind = EstimatorKind::hit_floor_prob;
    bool condition_on_explosion = false;
};

struct MonteCarloReport {
    std::string estimator;
    std::uint64_t n_paths = 0;
    std::uint64_t n_used = 0;
    double mean = 0.0;
    double variance = 0.0;
    double ci95_half = 0.0;
    std::string conditioning = "none";
    double conditioning_prob = 1.0;
    double conditioning_bias_bound = 0.0;  // e^{-p x_stop} rejection-proxy error
    std::uint64_t seed = 0;
    std::string seed_provenance;
    bool empty = false;
};

struct PathCounts {
    std::uint64_t floor = 0, stop = 0, censored = 0;
};

inline std::vector<MonteCarloReport> monte_carlo(const LevyModel& model,
                                                 const RateFunction& rate,
                                                 const SimConfig& cfg, double start,
                                                 const std::vector<EstimatorSpec>& specs,
                                                 std::optional<PhiFunction> phi = std::nullopt,
                                                 int threads = 1,
                                                 PathCounts* counts = nullptr) {
    if (cfg.replicates < 2) throw domain_error("monte_carlo: replicates >= 2 required");
    const auto n = cfg.replicates;
    PathEngine eng(model, rate, cfg, phi);
    struct PerPath {
        bool exploded = false;
        bool floored = false;
        double eta_floor = 0.0;
        double t_inf = 0.0;
    };
    std::vector<PerPath> rows(n);
    auto worker = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t i = lo; i < hi; ++i) {
            RunResult r = eng.run(start, rng::Stream(cfg.seed, i), {}, NullObserver{});
            PerPath& row = rows[i];
            row.exploded = r.end == PathEnd::stop;
            row.floored = r.end == PathEnd::floor;
            row.eta_floor = r.eta_end;
            if (row.exploded && phi) row.t_inf = r.eta_end + (*phi)(r.xi_end);
        }
    };
    if (threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::future<void>> futs;
        const std::uint64_t chunk = (n + threads - 1) / threads;
        for (int k = 0; k < threads; ++k) {
            const std::uint64_t lo = k * chunk;
            if (lo >= n) break;
            futs.push_back(std::async(std::launch::async, worker, lo, std::min(n, lo + chunk)));
        }
        for (auto& f : futs) f.get();
    }
    std::uint64_t accepted = 0;
    for (const auto& r : rows) accepted += r.exploded ? 1 : 0;
    if (counts) {
        counts->floor = counts->stop = counts->censored = 0;
        for (const auto& r : rows) {
            if (r.floored)
                ++counts->floor;
            else if (r.exploded)
                ++counts->stop;
            else
                ++counts->censored;
        }
    }

    std::vector<MonteCarloReport> reports;
    for (const auto& spec : specs) {
        MonteCarloReport rep;
        rep.estimator = spec.name;
        rep.n_paths = n;
        rep.seed = cfg.seed;
        rep.seed_provenance = "philox4x32(seed, path-index 0.." + std::to_string(n - 1) + ")";
        double sum = 0.0, sum2 = 0.0;
        std::uint64_t used = 0;
        for (const auto& row : rows) {
            if (spec.condition_on_explosion && !row.exploded) continue;
            double v = 0.0;
            switch (spec.kind) {
                case EstimatorKind::hit_floor_prob: v = row.floored ? 1.0 : 0.0; break;
                case EstimatorKind::weighted_exit:
                    v = row.floored ? std::exp(-row.eta_floor) : 0.0;
                    break;
                case EstimatorKind::explosion_prob: v = row.exploded ? 1.0 : 0.0; break;
                case EstimatorKind::eta_restricted_mean:
                    if (!phi)
                        throw precondition_error("H0", "eta_restricted_mean needs phi (H0)");
                    v = row.exploded ? row.t_inf : 0.0;
                    break;
            }
            sum += v;
            sum2 += v * v;
            ++used;
        }
        rep.n_used = used;
        if (spec.condition_on_explosion) {
            rep.conditioning = "reached x_stop before c_floor (explosion proxy)";
            rep.conditioning_prob = static_cast<double>(accepted) / static_cast<double>(n);
            rep.conditioning_bias_bound =
                cfg.x_stop > 0 ? std::exp(-model.p() * cfg.x_stop) : 0.0;
        }
        if (used == 0) {
            rep.empty = true;
            reports.push_back(rep);
            continue;
        }
        rep.mean = sum / static_cast<double>(used);
        rep.variance = used > 1 ? std::max(0.0, (sum2 - sum * sum / static_cast<double>(used)) /
                                                    static_cast<double>(used - 1))
                                : 0.0;
        rep.ci95_half = 1.959963984540054 * std::sqrt(rep.variance / static_cast<double>(used));
        reports.push_back(rep);
    }
    return reports;
}

}  // namespace lamperti
