#include <catch_amalgamated.hpp>

#include <cmath>

#include "lamperti/omega_scale.hpp"
#include "support.hpp"

using namespace lamperti;
using namespace testing_models;
using Catch::Approx;

namespace {

ScaleTable scale0(const LevyModel& m, double hi = 12.0) {
    GridSpec g;
    g.kind = GridSpec::Kind::uniform;
    g.lo = hi / 16.0;
    g.hi = hi;
    g.n = 17;
    ScaleOptions so;
    so.cache_hi = hi + 2.0;
    return compute_scale(m, 0.0, g, so);
}

OmegaScaleTable solve(const LevyModel& m, const RateFunction& r, double x_max, int n) {
    OmegaGrid og;
    og.x_max = x_max;
    og.n = n;
    return solve_w_omega(scale0(m, x_max), r, og);
}

}  // namespace

TEST_CASE("omega == 0: the Volterra kernel vanishes", "[omega]") {
    const RateFunction huge(PowerRate{0.0, 0.0, 1e18});  // omega ~ 1e-18
    const auto t = solve(brownian(), huge, 6.0, 301);
    const ScaleFunction& W = t.scale();
    for (std::size_t i = 0; i < t.grid().size(); i += 37)
        for (std::size_t j = 0; j <= i; j += 41)
            CHECK(t.at(i, j) == Approx(W.value(t.grid()[i] - t.grid()[j])).margin(1e-12));
}

TEST_CASE("grid diagonal carries W(0)", "[omega]") {
    const auto tb = solve(brownian(), rate_power2(), 4.0, 101);
    for (std::size_t i = 0; i < tb.grid().size(); i += 10) CHECK(tb.at(i, i) == 0.0);
    const auto tj = solve(cp_exp(), rate_power2(), 4.0, 401);
    for (std::size_t i = 0; i < tj.grid().size(); i += 40)
        CHECK(tj.at(i, i) == Approx(2.0).epsilon(1e-10));
}

TEST_CASE("omega == 1 reduces to the 1-scale function", "[omega]") {
    const auto t = solve(brownian(), rate_const(1.0), 10.0, 801);
    const ScaleFunction w1(brownian(), 1.0);
    for (std::size_t i = 40; i < t.grid().size(); i += 80) {
        const double x = t.grid()[i];
        CHECK(t.at(i, 0) == Approx(w1.value(x)).epsilon(1e-3));
    }
    // constant omega makes the kernel translation invariant in both slots
    for (std::size_t j : {std::size_t{80}, std::size_t{320}})
        for (std::size_t i = j + 40; i < t.grid().size(); i += 160)
            CHECK(t.at(i, j) ==
                  Approx(w1.value(t.grid()[i] - t.grid()[j])).epsilon(1e-3));
}

TEST_CASE("both equation forms of the Volterra system agree", "[omega]") {
    // residual of the second display, evaluated with the solved table:
    // W^(w)(x,y) = W(x-y) + int_y^x W^(w)(x,z) w(z) W(z-y) dz
    const RateFunction rate = rate_power2();
    const auto t = solve(brownian(), rate, 6.0, 601);
    const ScaleFunction& W = t.scale();
    const double h = t.step();
    const auto& g = t.grid();
    for (std::size_t j : {std::size_t{0}, std::size_t{120}}) {
        for (std::size_t i : {std::size_t{300}, std::size_t{600}}) {
            if (i <= j) continue;
            double acc = 0.0;
            for (std::size_t k = j; k <= i; ++k) {
                const double w = (k == j || k == i) ? 0.5 : 1.0;
                acc += w * t.at(i, k) * rate.omega(g[k]) * W.value(g[k] - g[j]);
            }
            const double rhs = W.value(g[i] - g[j]) + h * acc;
            CHECK(t.at(i, j) == Approx(rhs).epsilon(5e-3));
        }
    }
}

TEST_CASE("kernel positivity and monotonicity of W^(omega)", "[omega]") {
    const auto t = solve(brownian(), rate_power2(), 6.0, 301);
    const ScaleFunction& W = t.scale();
    const auto& g = t.grid();
    for (std::size_t j = 0; j < g.size(); j += 30) {
        double prev = -kInf;
        for (std::size_t i = j; i < g.size(); i += 15) {
            const double v = t.at(i, j);
            CHECK(v >= W.value(g[i] - g[j]) - 1e-12);
            CHECK(v >= prev - 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("pointwise larger omega gives pointwise larger W^(omega)", "[omega]") {
    const RateFunction r1 = rate_power2();                       // omega
    const RateFunction r2(PowerRate{1.0, 2.0, 0.5});             // 2 omega
    const auto t1 = solve(brownian(), r1, 6.0, 301);
    const auto t2 = solve(brownian(), r2, 6.0, 301);
    for (std::size_t i = 0; i < t1.grid().size(); i += 25)
        for (std::size_t j = 0; j <= i; j += 30)
            CHECK(t2.at(i, j) >= t1.at(i, j) - 1e-12);
}

TEST_CASE("grid-halving convergence is second order", "[omega]") {
    const ScaleFunction w1(brownian(), 1.0);
    const double exact = w1.value(6.0);
    const auto coarse = solve(brownian(), rate_const(1.0), 6.0, 151);
    const auto fine = solve(brownian(), rate_const(1.0), 6.0, 301);
    const double ec = std::abs(coarse.at(150, 0) - exact);
    const double ef = std::abs(fine.at(300, 0) - exact);
    CHECK(ec / ef == Approx(4.0).margin(2.0));  // ratio in [2, 6]
}

TEST_CASE("omega singular inside the grid is a domain error", "[omega]") {
    const RateFunction r(PowerRate{0.0, 2.0, 1.0});  // R(x) = x^2, omega blows at 0
    OmegaGrid og;
    og.y_lo = 0.0;
    og.x_max = 2.0;
    og.n = 51;
    CHECK_THROWS_AS(solve_w_omega(scale0(brownian(), 2.0), r, og), domain_error);
    og.y_lo = 1e-6;  // endpoint policy: start strictly inside (0, x_max)
    CHECK_NOTHROW(solve_w_omega(scale0(brownian(), 2.0), r, og));
}

TEST_CASE("weighted exit identities", "[omega]") {
    const auto t = solve(brownian(), rate_const(1.0), 2.0, 201);
    const ScaleFunction w1(brownian(), 1.0);
    CHECK(weighted_exit(t, 0.5, 0.5, 2.0) == 1.0);
    CHECK(weighted_exit(t, 1.0, 0.0, 2.0) == Approx(w1.value(1.0) / w1.value(2.0)).epsilon(2e-3));
    // omega -> 0 reduces to the plain exit probability
    const auto t0 = solve(brownian(), RateFunction(PowerRate{0.0, 0.0, 1e15}), 2.0, 201);
    const ScaleTable plain = scale0(brownian(), 4.0);
    CHECK(weighted_exit(t0, 1.0, 0.0, 2.0) ==
          Approx(exit_down_prob(plain, 1.0, 0.0, 2.0)).epsilon(1e-9));
    CHECK_THROWS_AS(weighted_exit(t, 2.5, 0.0, 2.0), domain_error);
}

TEST_CASE("H^(omega) for the exponential rate on the Brownian model", "[omega]") {
    const RateFunction rexp = rate_exp();
    OmegaGrid og;
    og.x_max = 25.0;
    og.n = 1251;
    OmegaScaleTable t = solve_w_omega(scale0(brownian(), 25.0), rexp, og);
    attach_h_omega(t, rexp);
    CHECK(t.has_h());
    CHECK(t.h_tail_bound() < 1e-6);
    // H(0+) finite (the gate holds: int W_p(z) e^{-z} dz = 1/2 < inf)
    CHECK(std::isfinite(t.h_nodes().front()));
    CHECK(t.h_nodes().front() > 1.0);
    // y large: H(y) e^{py} -> 1
    CHECK(t.h_value(12.0) * std::exp(12.0) == Approx(1.0).epsilon(1e-4));
    // H decreasing
    double prev = kInf;
    for (double y : {0.0, 0.5, 2.0, 8.0, 20.0}) {
        const double v = t.h_value(y);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("H^(omega) gate: divergent criterion is a named precondition", "[omega]") {
    OmegaGrid og;
    og.x_max = 10.0;
    og.n = 201;
    OmegaScaleTable t = solve_w_omega(scale0(brownian(), 10.0), rate_const(1.0), og);
    try {
        attach_h_omega(t, rate_const(1.0));
        FAIL("expected precondition_error");
    } catch (const precondition_error& e) {
        CHECK(e.condition() == "omega-Wp tail");
    }
}

TEST_CASE("downward laplace via H ratio", "[omega]") {
    // omega -> 0 limit: ratio -> e^{-p(x-c)} = ruin_laplace at q = 0
    const RateFunction nearly_zero(PowerRate{1.0, 2.0, 1e6});
    const double v = downward_laplace(brownian(), nearly_zero, 1.0, 0.1);
    CHECK(v == Approx(std::exp(-0.9)).epsilon(1e-4));
    CHECK(downward_laplace(brownian(), nearly_zero, 0.7, 0.7) == 1.0);
    // decreasing in x
    const RateFunction rexp = rate_exp();
    double prev = 1.0;
    for (double x : {0.3, 0.8, 1.5, 3.0}) {
        const double r = downward_laplace(brownian(), rexp, x, 0.1);
        CHECK(r < prev + 1e-12);
        CHECK(r > 0.0);
        prev = r;
    }
}

TEST_CASE("downward laplace at c = 0 requires H1", "[omega]") {
    // BV model with R = x^2: int_{0+} omega diverges, H1 fails
    const RateFunction r(PowerRate{0.0, 2.0, 1.0});
    try {
        downward_laplace(cp_exp(), r, 1.0, 0.0);
        FAIL("expected precondition_error");
    } catch (const precondition_error& e) {
        CHECK(e.condition() == "H1");
    }
}

TEST_CASE("boundary classification integral tests", "[omega]") {
    const LevyModel b = brownian();
    SECTION("power rates on the diffusion model") {
        // explosion iff theta > 1 (paper remark); extinction iff theta < 2 (W ~ x)
        auto cls = classify_boundaries(b, RateFunction(PowerRate{0.0, 1.5, 1.0}));
        CHECK(cls.explosion == TriState::yes);
        CHECK(cls.extinction == TriState::yes);
        cls = classify_boundaries(b, RateFunction(PowerRate{0.0, 3.0, 1.0}));
        CHECK(cls.explosion == TriState::yes);
        CHECK(cls.extinction == TriState::no);
        cls = classify_boundaries(b, RateFunction(PowerRate{0.0, 0.5, 1.0}));
        CHECK(cls.explosion == TriState::no);
    }
    SECTION("constant rate never explodes") {
        CHECK(classify_boundaries(b, rate_const(1.0)).explosion == TriState::no);
    }
    SECTION("bounded variation near-zero exponent") {
        auto cls = classify_boundaries(cp_exp(), RateFunction(PowerRate{0.0, 0.5, 1.0}));
        CHECK(cls.extinction == TriState::yes);  // int x^{-1/2} converges
        cls = classify_boundaries(cp_exp(), RateFunction(PowerRate{0.0, 1.5, 1.0}));
        CHECK(cls.extinction == TriState::no);
    }
    SECTION("p = 0 model cannot explode") {
        const LevyModel down(2.0, -1.0);
        CHECK(classify_boundaries(down, rate_power2()).explosion == TriState::no);
    }
    SECTION("tabulated rate without tail metadata is inconclusive") {
        TabulatedRate t;
        t.x = {1.0, 2.0, 4.0};
        t.r = {1.0, 4.0, 16.0};
        const auto cls = classify_boundaries(b, RateFunction(t));
        CHECK(cls.explosion == TriState::inconclusive);
    }
}

TEST_CASE("condition report H0/H1/lambda", "[omega]") {
    const LevyModel b = brownian();
    auto rep = check_h0_h1_h2(b, rate_power2());
    CHECK(rep.h0 == TriState::yes);
    CHECK(rep.h1 == TriState::yes);
    REQUIRE(rep.lambda.has_value());
    CHECK(*rep.lambda == 0.0);
    CHECK(rep.lambda_exact);

    rep = check_h0_h1_h2(b, rate_exp());
    CHECK(rep.h0 == TriState::yes);
    REQUIRE(rep.lambda.has_value());
    CHECK(*rep.lambda == 1.0);

    rep = check_h0_h1_h2(b, rate_const(1.0));
    CHECK(rep.h0 == TriState::no);
    CHECK(rep.h1 == TriState::no);
}
