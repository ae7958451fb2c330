#include <catch_amalgamated.hpp>

#include <cmath>

#include "lamperti/explosion.hpp"
#include "support.hpp"

using namespace lamperti;
using namespace testing_models;
using Catch::Approx;

TEST_CASE("moment recursion basics", "[explosion]") {
    MomentOptions opt;
    opt.x_max = 80.0;
    opt.n_nodes = 801;
    const auto tables = moment_recursion(brownian(), rate_power2(), 3, opt);
    REQUIRE(tables.size() == 4);
    // m_0(x) = 1 - e^{-px} exactly
    for (std::size_t i = 0; i < tables[0].x.size(); i += 97)
        CHECK(tables[0].m[i] == Approx(-std::expm1(-tables[0].x[i])).margin(1e-15));
    // m_0(1)
    const double h = tables[0].x[1];
    const auto i1 = static_cast<std::size_t>(std::lround(1.0 / h));
    CHECK(tables[0].x[i1] == Approx(1.0));
    CHECK(tables[0].m[i1] == Approx(1.0 - std::exp(-1.0)).margin(1e-15));
    // nonnegative, and the n = 1 tail bound is recorded
    for (const auto& t : tables)
        for (double v : t.m) CHECK(v >= -1e-14);
    CHECK(tables[1].tail_bound > 0.0);
    CHECK(tables[1].tail_bound < 0.05);
}

TEST_CASE("factorial bound m_n <= n! (int omega W_p)^n", "[explosion]") {
    for (const RateFunction& rate : {rate_power2(), rate_exp()}) {
        MomentOptions opt;
        opt.x_max = 60.0;
        opt.n_nodes = 601;
        const ScaleFunction W(brownian(), 0.0);
        const double I =
            integrate([&](double y) { return rate.omega(y) * W.tilted(y); }, 1e-9, 60.0);
        const auto tables = moment_recursion(brownian(), rate, 4, opt);
        for (const auto& t : tables) {
            double fact = 1.0;
            for (int k = 2; k <= t.order; ++k) fact *= k;
            const double cap = fact * std::pow(I, t.order) * (1.0 + 1e-6) + t.tail_bound;
            for (double v : t.m) CHECK(v <= cap + 1e-12);
        }
    }
}

TEST_CASE("m_1 approaches phi at high levels (regime A rate)", "[explosion]") {
    MomentOptions opt;
    opt.x_max = 800.0;
    opt.n_nodes = 4001;
    const auto tables = moment_recursion(brownian(), rate_power2(), 1, opt);
    PhiFunction phi(rate_power2(), 1.0);
    const double h = tables[1].x[1];
    auto ratio_at = [&](double x) {
        const auto i = static_cast<std::size_t>(std::lround(x / h));
        return tables[1].m[i] / phi(tables[1].x[i]);
    };
    const double r10 = ratio_at(10.0), r40 = ratio_at(40.0), r120 = ratio_at(120.0);
    CHECK(std::abs(r40 - 1.0) < std::abs(r10 - 1.0));
    CHECK(std::abs(r120 - 1.0) < std::abs(r40 - 1.0));
    CHECK(r120 == Approx(1.0).epsilon(0.02));
}

TEST_CASE("moment recursion gates on p > 0 and H1", "[explosion]") {
    const LevyModel down(2.0, -1.0);  // p = 0
    try {
        moment_recursion(down, rate_power2(), 1);
        FAIL("expected precondition_error");
    } catch (const precondition_error& e) {
        CHECK(e.condition() == "p>0");
    }
    try {
        moment_recursion(cp_exp(), RateFunction(PowerRate{0.0, 2.0, 1.0}), 1);
        FAIL("expected precondition_error");
    } catch (const precondition_error& e) {
        CHECK(e.condition() == "H1");
    }
}

TEST_CASE("exponential moment of the explosion time", "[explosion]") {
    MomentOptions opt;
    opt.x_max = 40.0;
    opt.n_nodes = 801;
    const RateFunction rexp = rate_exp();
    SECTION("q = 0 collapses to m_0") {
        const auto r = exp_moment(brownian(), rexp, 0.0, 1.0, opt);
        CHECK(r.value == Approx(1.0 - std::exp(-1.0)).margin(1e-10));
    }
    SECTION("small q < 0 stays inside (0, m_0)") {
        const auto r = exp_moment(brownian(), rexp, -0.3, 1.0, opt);
        CHECK(r.value > 0.0);
        CHECK(r.value < 1.0 - std::exp(-1.0));
    }
    SECTION("q at half the radius converges with a tiny remainder") {
        const auto probe = exp_moment(brownian(), rexp, 0.0, 1.0, opt);
        const auto r = exp_moment(brownian(), rexp, 0.5 * probe.radius, 1.0, opt);
        CHECK(r.remainder_bound < 1e-8);
        CHECK(r.value > 1.0 - std::exp(-1.0));  // q > 0 enlarges the weight
    }
    SECTION("q outside the radius is a domain error naming the radius") {
        const auto probe = exp_moment(brownian(), rexp, 0.0, 1.0, opt);
        try {
            exp_moment(brownian(), rexp, 1.5 * probe.radius, 1.0, opt);
            FAIL("expected domain_error");
        } catch (const domain_error& e) {
            CHECK(std::string(e.what()).find("radius") != std::string::npos);
        }
    }
}

TEST_CASE("phi and its right inverse", "[explosion]") {
    SECTION("power rate: phi(x) = 1/(1+x), inverse 1/t - 1") {
        PhiFunction phi(rate_power2(), 1.0);
        CHECK(phi(0.0) == Approx(1.0));
        CHECK(phi(9.0) == Approx(0.1));
        CHECK(phi.inverse(0.1) == Approx(9.0).epsilon(1e-12));
        CHECK(phi(phi.inverse(0.037)) == Approx(0.037).epsilon(1e-10));
        CHECK(phi.inverse(phi(5.0)) == Approx(5.0).epsilon(1e-10));
    }
    SECTION("exponential rate: phi(x) = e^{-lambda x}/(lambda gamma)") {
        PhiFunction phi(rate_exp(2.0), 0.5);
        for (double x : {0.5, 2.0, 10.0})
            CHECK(phi(x) == Approx(std::exp(-2.0 * x) / (2.0 * 0.5)).epsilon(1e-12));
        CHECK(phi(phi.inverse(1e-6)) == Approx(1e-6).epsilon(1e-10));
    }
    SECTION("monotone decreasing, both ways") {
        PhiFunction phi(rate_power2(), 1.0);
        double prev = kInf;
        for (double x : {0.1, 1.0, 5.0, 50.0}) {
            CHECK(phi(x) < prev);
            prev = phi(x);
        }
        prev = kInf;
        for (double t : {1e-4, 1e-3, 1e-2, 0.5}) {
            CHECK(phi.inverse(t) < prev);
            prev = phi.inverse(t);
        }
    }
    SECTION("H0 failure is a named precondition") {
        try {
            PhiFunction phi(rate_const(1.0), 1.0);
            FAIL("expected precondition_error");
        } catch (const precondition_error& e) {
            CHECK(e.condition() == "H0");
        }
    }
}

TEST_CASE("regime report", "[explosion]") {
    SECTION("power rate: lambda = 0, regime A, speed side condition holds") {
        const auto rep = estimate_lambda(rate_power2(), 1.0);
        REQUIRE(rep.conclusive);
        CHECK(rep.lambda == 0.0);
        CHECK(rep.regime == 'A');
        CHECK(rep.lambda_exact);
        CHECK(rep.phi_ratio_separation.status == TriState::yes);
        CHECK(rep.phi_ratio_separation.value > 1.2);  // liminf phi(y)/phi(hy) = h at h = 1.25
    }
    SECTION("exponential rate: lambda = 1, regime B, side value gamma^2 lambda / 2") {
        const auto rep = estimate_lambda(rate_exp(), 1.0);
        REQUIRE(rep.conclusive);
        CHECK(rep.lambda == 1.0);
        CHECK(rep.regime == 'B');
        CHECK(rep.clock_second_moment.status == TriState::yes);
        CHECK(rep.clock_second_moment.value == Approx(0.5).epsilon(1e-12));
    }
    SECTION("exponent read-off") {
        const auto rep = estimate_lambda(rate_exp(2.0), 1.0);
        CHECK(rep.lambda == 2.0);
    }
    SECTION("tabulated rate gets a numeric estimate with spread") {
        TabulatedRate t;
        for (double x = 1.0; x <= 4100.0; x *= 2.0) {
            t.x.push_back(x);
            t.r.push_back(std::pow(1.0 + x, 3.0));
        }
        t.theta_inf = 3.0;
        const auto rep = estimate_lambda(RateFunction(t), 1.0);
        REQUIRE(rep.conclusive);
        CHECK(!rep.lambda_exact);
        CHECK(rep.lambda == Approx(0.0).margin(0.02));
        CHECK(rep.lambda_spread >= 0.0);
    }
}

TEST_CASE("reference sampler for the regime-B limit law", "[explosion]") {
    SECTION("no-jump model: overshoots vanish identically") {
        LimitLawOptions opt;
        opt.x_ref = 8.0;
        opt.dt = 0.01;
        const auto s = sample_limit_law_B(brownian(), 1.0, 300, 2024, opt);
        REQUIRE(!s.overshoot.empty());
        for (double v : s.overshoot) CHECK(v == 0.0);
        // s = 0 transform of the overshoot law: mean of e^{0} is 1
        double m = 0.0;
        for (double v : s.overshoot) m += std::exp(-0.0 * v);
        CHECK(m / s.overshoot.size() == 1.0);
        // clock samples are positive and finite; the law has a heavy-ish
        // right tail from paths that dip low before drifting up
        REQUIRE(s.clock.size() + s.rejected == 300);
        double med = 0.0;
        {
            auto v = s.clock;
            med = median(v);
        }
        CHECK(med > 0.1);
        CHECK(med < 10.0);
        for (double v : s.clock) {
            CHECK(v > 0.0);
            CHECK(std::isfinite(v));
        }
    }
    SECTION("jump model: mean e^{-p rho} matches 1/(gamma Phi'(0)) = 1/2") {
        LimitLawOptions opt;
        opt.x_ref = 25.0;
        opt.dt = 0.01;
        const auto s = sample_limit_law_B(cp_exp(), 1.0, 2500, 91, opt);
        REQUIRE(s.overshoot.size() > 2000);
        double m = 0.0, m2 = 0.0;
        for (double v : s.overshoot) {
            const double e = std::exp(-v);  // p = 1
            m += e;
            m2 += e * e;
        }
        const auto n = static_cast<double>(s.overshoot.size());
        m /= n;
        const double se = std::sqrt((m2 / n - m * m) / n);
        CHECK(std::abs(m - 0.5) < 3.5 * se + 0.01);
    }
    SECTION("clock mean is stable under a tighter tail tolerance") {
        LimitLawOptions a;
        a.dt = 0.01;
        a.tail_tol = 1e-6;
        LimitLawOptions b = a;
        b.tail_tol = 1e-10;  // doubles the effective cut level
        const auto sa = sample_limit_law_B(brownian(), 1.0, 800, 5, a);
        const auto sb = sample_limit_law_B(brownian(), 1.0, 800, 5, b);
        double ma = 0, mb = 0;
        for (double v : sa.clock) ma += v;
        for (double v : sb.clock) mb += v;
        ma /= sa.clock.size();
        mb /= sb.clock.size();
        CHECK(ma == Approx(mb).epsilon(0.02));
    }
}

TEST_CASE("verify_thm1: no explosion gives the empty table", "[explosion]") {
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.seed = 1;
    cfg.x_stop = 50.0;
    const auto res = verify_thm1(brownian(), rate_const(1.0), {5.0}, cfg, 1.0, {});
    CHECK(res.empty);
    CHECK(res.rows.empty());
}

TEST_CASE("verify_thm1 regime A concentrates (small run)", "[explosion]") {
    SimConfig cfg;
    cfg.dt = 0.02;
    cfg.c_floor = 1e-3;
    cfg.x_stop = 160.0;
    cfg.t_max = 4000.0;
    cfg.seed = 1234;
    VerifyOptions vopt;
    vopt.n_accept = 400;
    vopt.threads = 2;
    const auto res = verify_thm1(brownian(), rate_power2(), {8.0, 24.0}, cfg, 1.0, vopt);
    REQUIRE(!res.empty);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.regime == 'A');
    CHECK(res.rows[0].n >= 400);
    CHECK(res.rows[1].p_outside_025 < res.rows[0].p_outside_025 + 0.05);
    CHECK(res.rows[1].mean_ratio == Approx(1.0).epsilon(0.2));
    CHECK(res.acceptance_rate == Approx(1.0 - std::exp(-1.0)).epsilon(0.15));
}

TEST_CASE("verify_thm1 is deterministic in the worker count", "[explosion]") {
    SimConfig cfg;
    cfg.dt = 0.02;
    cfg.c_floor = 1e-3;
    cfg.x_stop = 120.0;
    cfg.t_max = 3000.0;
    cfg.seed = 555;
    VerifyOptions v1;
    v1.n_accept = 150;
    v1.threads = 1;
    VerifyOptions v2 = v1;
    v2.threads = 2;
    const auto a = verify_thm1(brownian(), rate_power2(), {8.0}, cfg, 1.0, v1);
    const auto b = verify_thm1(brownian(), rate_power2(), {8.0}, cfg, 1.0, v2);
    REQUIRE(!a.empty);
    REQUIRE(!b.empty);
    CHECK(a.rows[0].mean_ratio == b.rows[0].mean_ratio);  // bitwise
    CHECK(a.rows[0].p_outside_025 == b.rows[0].p_outside_025);
    CHECK(a.accepted == b.accepted);
}

TEST_CASE("verify_thm1 regime B: KS improves along the level grid", "[explosion]") {
    // at a low level the conditioning to stay positive still distorts the
    // clock law (order e^{-p x}); at x = 30 only sampling noise remains
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.c_floor = 1e-3;
    cfg.x_stop = 42.0;
    cfg.t_max = 1500.0;
    cfg.seed = 4242;
    VerifyOptions vopt;
    vopt.n_accept = 800;
    vopt.threads = 2;
    const auto res = verify_thm1(brownian(), rate_exp(), {2.0, 30.0}, cfg, 1.0, vopt);
    REQUIRE(!res.empty);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.regime == 'B');
    CHECK(res.rows[0].ks_reference >= res.rows[1].ks_reference);
    CHECK(res.rows[1].ks_reference < 0.08);
}

TEST_CASE("verify_thm2 medians track the deterministic curve (small run)", "[explosion]") {
    VerifyOptions vopt;
    vopt.n_accept = 150;
    SECTION("regime A") {
        SimConfig cfg;
        cfg.dt = 0.02;
        cfg.c_floor = 1e-3;
        cfg.x_stop = 150.0;
        cfg.t_max = 4000.0;
        cfg.seed = 77;
        const auto res = verify_thm2(brownian(), rate_power2(), {0.02, 0.05}, cfg, 1.0, vopt);
        REQUIRE(!res.empty);
        CHECK(res.regime == 'A');
        for (const auto& row : res.rows) {
            REQUIRE(row.n > 100);
            CHECK(row.median_ratio == Approx(1.0).epsilon(0.3));
            CHECK(row.median_inf_ratio <= row.median_ratio + 1e-12);
        }
    }
    SECTION("regime B") {
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.c_floor = 1e-3;
        cfg.x_stop = 32.0;
        cfg.t_max = 500.0;
        cfg.seed = 78;
        const auto res = verify_thm2(brownian(), rate_exp(), {1e-5, 1e-4}, cfg, 1.0, vopt);
        REQUIRE(!res.empty);
        CHECK(res.regime == 'B');
        for (const auto& row : res.rows) {
            REQUIRE(row.n > 100);
            CHECK(row.median_ratio == Approx(1.0).epsilon(0.3));
        }
    }
}

TEST_CASE("prop46 tail-integral ratios", "[explosion]") {
    SECTION("case (b) and (c) for the exponential rate (exact integrals)") {
        const auto rows = prop46_checks(rate_exp(), 1.0, 0.5);
        for (const auto& r : rows) {
            if (r.which == "b1" || r.which == "b2") CHECK(r.ratio == Approx(1.0).epsilon(1e-6));
            if (r.which == "c") CHECK(r.ratio == Approx(1.0).epsilon(1e-9));
        }
        bool saw_b = false, saw_c = false;
        for (const auto& r : rows) {
            saw_b |= r.which == "b1";
            saw_c |= r.which == "c";
        }
        CHECK(saw_b);
        CHECK(saw_c);
    }
    SECTION("case (a) trend to zero for the power rate") {
        const auto rows = prop46_checks(rate_power2(), 1.0, 1.0, {10.0, 100.0, 1000.0});
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].which == "a");
        CHECK(rows[1].ratio < rows[0].ratio);
        CHECK(rows[2].ratio < rows[1].ratio);
        CHECK(rows[2].ratio < 0.01);
    }
    SECTION("alpha >= lambda in case (b) is a domain error") {
        CHECK_THROWS_AS(prop46_checks(rate_exp(), 1.0, 1.5), domain_error);
    }
}

TEST_CASE("ks distance sanity", "[explosion]") {
    std::vector<double> a, b;
    for (int i = 0; i < 1000; ++i) {
        a.push_back(i / 1000.0);
        b.push_back(i / 1000.0 + 0.2);
    }
    CHECK(ks_distance(a, a) == Approx(0.0).margin(1e-12));
    CHECK(ks_distance(a, b) == Approx(0.2).margin(0.01));
}
