#include <catch_amalgamated.hpp>

#include <cmath>

#include "lamperti/scale_functions.hpp"
#include "support.hpp"

using namespace lamperti;
using namespace testing_models;
using Catch::Approx;

namespace {

ScaleTable brownian_table(double q = 0.0, ScaleMethod method = ScaleMethod::automatic) {
    ScaleOptions opt;
    opt.method = method;
    GridSpec g;
    g.kind = GridSpec::Kind::geometric;
    g.lo = 1e-2;
    g.hi = 10.0;
    g.n = 120;
    return compute_scale(brownian(), q, g, opt);
}

}  // namespace

TEST_CASE("closed-form Brownian scale: W(x) = e^x - 1", "[scale]") {
    const ScaleTable t = brownian_table();
    CHECK(t.fn->closed_form());
    CHECK(t.fn->value(1.0) == Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
    CHECK(t.fn->value(-0.5) == 0.0);  // support convention
    CHECK(t.fn->w0() == 0.0);
    CHECK(t.fn->tilted_limit() == Approx(1.0));  // W_p(inf) = Phi'(0) = 1
    // W_p nondecreasing toward the limit
    double prev = -1.0;
    for (double x : t.x) {
        const double wp = t.fn->tilted(x);
        CHECK(wp >= prev - 1e-15);
        prev = wp;
    }
}

TEST_CASE("numeric inversion reproduces the Brownian closed form", "[scale]") {
    ScaleOptions opt;
    opt.method = ScaleMethod::inversion;
    const ScaleFunction fn(brownian(), 0.0, opt);
    CHECK(!fn.closed_form());
    for (double x = 0.01; x <= 10.0; x *= 1.31) {
        const double exact = std::exp(x) - 1.0;
        CHECK(fn.value(x) == Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("inversion on the jump model matches partial fractions", "[scale]") {
    ScaleOptions opt;
    const ScaleFunction fn(cp_exp(), 0.0, opt);  // auto -> inversion (jumps present)
    CHECK(!fn.closed_form());
    CHECK(fn.w0() == Approx(2.0).epsilon(1e-12));  // 1/|mu_eff|
    for (double x : {0.05, 0.3, 1.0, 3.0, 8.0, 20.0})
        CHECK(fn.value(x) == Approx(cp_exp_scale_w(x)).epsilon(2e-6));
    CHECK(fn.tilted_limit() == Approx(4.0).epsilon(1e-10));  // Phi'(0) = 1/psi'(1)
}

TEST_CASE("Laplace round trip holds for computed tables", "[scale]") {
    const ScaleTable tb = brownian_table();
    for (double s : {1.6, 2.5, 4.0}) {
        const auto rt = scale_laplace_roundtrip(*tb.fn, s);
        CHECK(rt.rel_err < 1e-6);
    }
    ScaleOptions opt;
    GridSpec g;
    const ScaleTable tj = compute_scale(cp_exp(), 0.0, g, opt);
    for (double s : {1.5, 2.0, 3.5, 6.0}) {
        const auto rt = scale_laplace_roundtrip(*tj.fn, s);
        CHECK(rt.rel_err < 1e-4);
    }
}

TEST_CASE("q-scale table and W_p limit at q > 0", "[scale]") {
    const ScaleTable t = brownian_table(1.0);
    // roots of s^2 - s - 1: W^{(1)}(x) = (e^{s+ x} - e^{s- x})/sqrt(5)
    const double r5 = std::sqrt(5.0);
    const double sp = (1.0 + r5) / 2.0, sm = (1.0 - r5) / 2.0;
    for (double x : {0.5, 1.0, 2.0})
        CHECK(t.fn->value(x) == Approx((std::exp(sp * x) - std::exp(sm * x)) / r5).epsilon(1e-12));
}

TEST_CASE("q-scale inversion on the jump model matches partial fractions", "[scale]") {
    // psi(s) - 1 = (s^2/2 - 3s/2 - 1)/(1+s): two real roots, so
    // W^{(1)}(x) = 2(1+s+)/(s+-s-) e^{s+ x} - 2(1+s-)/(s+-s-) e^{s- x}
    const double r = std::sqrt(4.25);
    const double sp = 1.5 + r, sm = 1.5 - r;
    auto exact = [&](double x) {
        return 2.0 * (1.0 + sp) / (sp - sm) * std::exp(sp * x) -
               2.0 * (1.0 + sm) / (sp - sm) * std::exp(sm * x);
    };
    const ScaleFunction fn(cp_exp(), 1.0);
    CHECK(fn.alpha() == Approx(sp).epsilon(1e-12));
    for (double x : {0.1, 0.7, 2.0, 6.0})
        CHECK(fn.value(x) == Approx(exact(x)).epsilon(2e-6));
}

TEST_CASE("power-tail scale function round trip", "[scale]") {
    const LevyModel m = power_tail();
    ScaleOptions so;
    so.cache_hi = 30.0;
    const ScaleFunction fn(m, 0.0, so);
    CHECK(fn.w0() == 0.0);  // sigma_total > 0
    CHECK(fn.tilted_limit() == Approx(1.0 / m.psi_prime(m.p())).epsilon(1e-10));
    for (double s : {m.p() + 0.6, m.p() + 1.5, m.p() + 4.0})
        CHECK(scale_laplace_roundtrip(fn, s, 28.0).rel_err < 1e-4);
    // W_p nondecreasing toward its limit
    double prev = -1.0;
    for (double x : {0.01, 0.1, 1.0, 5.0, 20.0}) {
        const double wp = fn.tilted(x);
        CHECK(wp >= prev);
        prev = wp;
    }
}

TEST_CASE("resolvent density of the Brownian model", "[scale]") {
    const ScaleTable t = brownian_table();
    CHECK(resolvent_density(t, 1.0, 2.0) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK(resolvent_density(t, 2.0, 1.0) ==
          Approx(std::exp(-1.0) - std::exp(-2.0)).epsilon(1e-12));
    CHECK(resolvent_density(t, 1.5, 1e-9) == Approx(0.0).margin(1e-8));  // u(x, 0+) = 0
    // nonnegative on a grid of pairs, and stable far out
    for (double x : {0.5, 3.0, 12.0})
        for (double y : {0.2, 2.0, 9.0, 30.0}) CHECK(resolvent_density(t, x, y) >= 0.0);
}

TEST_CASE("monotone mass of the resolvent in the upper limit", "[scale]") {
    const ScaleTable t = brownian_table();
    auto mass = [&](double B) {
        return integrate([&](double y) { return resolvent_density(t, 1.3, y); }, 1e-9, B);
    };
    double prev = 0.0;
    for (double B : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double m = mass(B);
        CHECK(m >= prev - 1e-12);
        prev = m;
    }
}

TEST_CASE("exit_down_prob identities", "[scale]") {
    const ScaleTable t = brownian_table();
    CHECK(exit_down_prob(t, 1.0, 0.0, 2.0) ==
          Approx(1.0 / (std::exp(1.0) + 1.0)).epsilon(1e-12));
    CHECK(exit_down_prob(t, 1e-9, 0.0, 2.0) == Approx(1.0).epsilon(1e-6));
    CHECK(exit_down_prob(t, 2.0 - 1e-9, 0.0, 2.0) == Approx(0.0).margin(1e-8));
    CHECK_THROWS_AS(exit_down_prob(t, 0.5, 1.0, 2.0), domain_error);
    // monotone: non-increasing in x, non-decreasing in c
    double prev = 1.0;
    for (double x : {0.2, 0.6, 1.0, 1.4, 1.8}) {
        const double v = exit_down_prob(t, x, 0.0, 2.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    CHECK(exit_down_prob(t, 1.0, 0.5, 2.0) >= exit_down_prob(t, 1.0, 0.0, 2.0));
}

TEST_CASE("ruin_laplace", "[scale]") {
    const LevyModel m = brownian();
    CHECK(ruin_laplace(m, 1.0, 1.0, 3.0) == 1.0);
    CHECK(ruin_laplace(m, 1.0, 0.0, 0.0) == Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(ruin_laplace(m, 1.0, 0.0, 2.0) == Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("renewal limit is exact in y for the Brownian model", "[scale]") {
    const ScaleTable t = brownian_table();
    for (double x : {0.3, 1.0, 2.5}) {
        const double expect = 1.0 - std::exp(-x);
        for (double y : {0.1, 1.0, 4.0, 9.0}) {
            const auto rc = renewal_limit(t, x, y);
            CHECK(rc.value == Approx(expect).margin(1e-9));
            CHECK(rc.analytic_limit == Approx(expect).margin(1e-12));  // gamma = 1
        }
    }
    // x -> 0+: both sides vanish
    CHECK(renewal_limit(t, 1e-10, 1.0).value == Approx(0.0).margin(1e-9));
}

TEST_CASE("renewal limit approaches 1/gamma for the jump model", "[scale]") {
    GridSpec g;
    const ScaleTable t = compute_scale(cp_exp(), 0.0, g);
    // paper limit: e^{-px} W(x+y) - W(y) -> 1/gamma = 2 as x, y -> inf.
    // The tilted difference is amplified by e^{py}, so the inversion noise
    // bounds how far out the check can go; y = 6 keeps it at ~1e-3.
    const auto rc = renewal_limit(t, 6.0, 6.0);
    CHECK(rc.value == Approx(2.0).epsilon(1e-2));
    CHECK(rc.analytic_limit == Approx((1.0 - std::exp(-6.0)) / 0.5).epsilon(1e-10));
}

TEST_CASE("tilted renewal limit via esscher (light-tail remark)", "[scale]") {
    // e^{-phi(q) y}(e^{-Phi(q)x} W^{(q)}(x+y) - W^{(q)}(y)) -> (e^{(phi-Phi)x}-1)/psi'(phi),
    // which is the renewal limit applied to the model tilted by the left root.
    const LevyModel m = brownian();
    const double q = 0.8;
    const double phi_left = m.phi_left(q);
    CHECK(phi_left < 0.0);
    CHECK(m.psi_extended(phi_left) == Approx(q).margin(1e-10));
    const LevyModel tilted = m.esscher(phi_left);
    CHECK(tilted.p() == Approx(m.phi(q) - phi_left).epsilon(1e-9));
    GridSpec g;
    const ScaleTable tt = compute_scale(tilted, 0.0, g);
    const double x = 1.2;
    const double want = (1.0 - std::exp(-tilted.p() * x)) / tilted.gamma();
    const auto rc = renewal_limit(tt, x, 14.0);
    CHECK(rc.value == Approx(want).margin(1e-9));
}

TEST_CASE("overshoot transform identities", "[scale]") {
    for (const LevyModel& m : {brownian(), cp_exp(), power_tail()}) {
        const OvershootLaw law(m);
        CHECK(law.transform(0.0) == Approx(1.0).margin(1e-9));
        const double want = 1.0 / (m.gamma() * m.phi_prime0());
        CHECK(law.transform(m.p()) == Approx(want).margin(1e-9));
        // continuity across s = p
        const double eps = 1e-7 * m.p();
        CHECK(std::abs(law.transform(m.p() + eps) - law.transform(m.p() - eps)) <= 1e-6);
    }
}

TEST_CASE("Brownian overshoot law is degenerate at zero", "[scale]") {
    const OvershootLaw law(brownian());
    for (double s : {0.0, 0.4, 1.0, 3.0, 11.0})
        CHECK(law.transform(s) == Approx(1.0).margin(1e-11));
}

TEST_CASE("cp-exp overshoot law is Exp(1): rho(s) = 1/(1+s)", "[scale]") {
    const OvershootLaw law(cp_exp());
    double prev = 1.0 + 1e-12;
    for (double s : {0.0, 0.2, 0.5, 1.0, 2.0, 5.0}) {
        const double v = law.transform(s);
        CHECK(v == Approx(1.0 / (1.0 + s)).margin(1e-9));
        CHECK(v >= 0.0);
        CHECK(v <= prev);  // completely monotone on the grid: nonneg, decreasing
        prev = v;
    }
}

TEST_CASE("overshoot law rejects p = 0 and infinite gamma", "[scale]") {
    const LevyModel drift_down(2.0, -1.0);  // gamma < 0, p = 0
    CHECK_THROWS_AS(OvershootLaw(drift_down), unsupported_model_error);
    const LevyModel heavy(1.0, 0.0, JumpMeasure(PowerTailJumps{0.5, 0.8, 0.01}));
    CHECK_THROWS_AS(OvershootLaw(heavy), unsupported_model_error);
}

TEST_CASE("scale function rejects subordinator models", "[scale]") {
    // bounded variation with nonnegative effective drift: monotone paths
    CompoundPoissonJumps cp{1.0, ExponentialDensity{1.0}};
    const LevyModel sub(0.0, 1.5, JumpMeasure(cp));
    CHECK(sub.mu_eff() > 0);
    CHECK_THROWS_AS(ScaleFunction(sub, 0.0), unsupported_model_error);
}
