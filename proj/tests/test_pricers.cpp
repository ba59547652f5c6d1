#include <cmath>
#include <random>

#include "doctest.h"
#include "finn/error.hpp"
#include "finn/market_sim.hpp"
#include "finn/pricers/black_scholes.hpp"
#include "finn/pricers/heston.hpp"
#include "finn/pricers/monte_carlo.hpp"

using namespace finn;

namespace {

OptionSpec call(double k, double ttm, double r = 0.0) { return {k, ttm, r, OptionKind::call}; }
OptionSpec put(double k, double ttm, double r = 0.0) { return {k, ttm, r, OptionKind::put}; }

}  // namespace

TEST_CASE("bs: anchor contract") {
    const OptionSpec o = call(100.0, 0.36);
    CHECK(std::abs(bs_price(110.0, o, 0.125) - 10.38) <= 0.01);
    CHECK(std::abs(bs_greeks(110.0, o, 0.125).delta - 0.90) <= 0.005);
}

TEST_CASE("bs: limits") {
    CHECK(bs_price(120.0, call(100.0, 0.0), 0.2) == 20.0);
    CHECK(bs_price(80.0, call(100.0, 0.0), 0.2) == 0.0);
    CHECK(bs_price(80.0, put(100.0, 0.0), 0.2) == 20.0);
    CHECK(bs_price(120.0, call(100.0, 0.24), 1e-12) == doctest::Approx(20.0));
    CHECK(bs_price(100.0, call(100.0, 0.5), 1e-9) == doctest::Approx(0.0));
    CHECK(std::abs(bs_greeks(300.0, call(100.0, 0.25), 0.1).delta - 1.0) < 1e-6);
    CHECK_THROWS_AS(bs_greeks(100.0, call(100.0, 0.0), 0.2), DomainError);
    CHECK_THROWS_AS(bs_price(-1.0, call(100.0, 0.2), 0.2), DomainError);
}

TEST_CASE("bs: greeks match finite differences") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> us(70, 130), ut(0.05, 1.0), uv(0.08, 0.5), ur(0.0, 0.06);
    for (int i = 0; i < 100; ++i) {
        const double s = us(gen), sig = uv(gen);
        const OptionSpec o{100.0, ut(gen), ur(gen), i % 2 ? OptionKind::call : OptionKind::put};
        const Greeks g = bs_greeks(s, o, sig);
        const double h = 1e-4 * s;
        const double up = bs_price(s + h, o, sig), mid = bs_price(s, o, sig), dn = bs_price(s - h, o, sig);
        CHECK(g.delta == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
        if (g.gamma > 1e-4) CHECK(g.gamma == doctest::Approx((up - 2 * mid + dn) / (h * h)).epsilon(1e-4));
    }
}

TEST_CASE("bs: parity, monotone and convex") {
    for (double s = 60; s <= 140; s += 5) {
        const double c = bs_price(s, call(100, 0.4, 0.03), 0.2);
        const double p = bs_price(s, put(100, 0.4, 0.03), 0.2);
        CHECK(c - p == doctest::Approx(s - 100 * std::exp(-0.03 * 0.4)).epsilon(1e-12));
    }
    double prev = -1.0;
    for (double s = 60; s <= 140; s += 0.5) {
        const double c = bs_price(s, call(100, 0.4), 0.2);
        CHECK(c >= prev);
        prev = c;
        CHECK(bs_greeks(s, call(100, 0.4), 0.2).gamma >= 0.0);
    }
}

TEST_CASE("heston: reduces to bs as xi -> 0") {
    HestonParams p;
    p.xi = 1e-6;
    for (double k : {90.0, 100.0, 110.0})
        for (double t : {0.24, 0.48}) {
            const double h = heston_price_cf(100.0, call(k, t), p);
            CHECK(std::abs(h - bs_price(100.0, call(k, t), 0.15)) < 1e-3);
            const Greeks hg = heston_greeks_bump(100.0, call(k, t), p);
            const Greeks bg = bs_greeks(100.0, call(k, t), 0.15);
            CHECK(std::abs(hg.delta - bg.delta) < 1e-4);
            CHECK(std::abs(hg.gamma - bg.gamma) < 1e-2);
        }
}

TEST_CASE("heston: put-call parity on random parameters") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        HestonParams p;
        p.kappa = 0.5 + 3.0 * u(gen);
        p.theta = 0.01 + 0.06 * u(gen);
        p.v0 = 0.01 + 0.06 * u(gen);
        p.rho = -0.9 + 1.8 * u(gen);
        p.xi = (0.05 + 0.9 * u(gen)) * std::sqrt(2 * p.kappa * p.theta);
        REQUIRE(validate_heston(p).ok);
        const double s = 80 + 40 * u(gen), k = 85 + 30 * u(gen), t = 0.1 + u(gen), r = 0.05 * u(gen);
        const double c = heston_price_cf(s, call(k, t, r), p);
        const double pp = heston_price_cf(s, put(k, t, r), p);
        CHECK(std::abs(c - pp - (s - k * std::exp(-r * t))) < 1e-6);
    }
}

TEST_CASE("heston: stable under quadrature refinement") {
    HestonParams p;
    QuadratureConfig fine;
    fine.n_nodes = 512;
    fine.upper_limit = 400.0;
    for (double k : {90.0, 100.0, 110.0})
        for (double t : {0.24, 0.36, 0.48}) {
            const double a = heston_price_cf(100.0, call(k, t), p);
            const double b = heston_price_cf(100.0, call(k, t), p, fine);
            CHECK(std::abs(a - b) < 1e-6);
        }
}

TEST_CASE("heston: greeks sane on the strike grid") {
    HestonParams p;
    for (double k = 90; k <= 110; k += 1) {
        const Greeks g = heston_greeks_bump(100.0, call(k, 0.36), p);
        CHECK(g.delta > 0.0);
        CHECK(g.delta < 1.0);
        CHECK(g.gamma > 0.0);
    }
    CHECK_THROWS_AS(heston_greeks_bump(100.0, call(100, 0.36), p, {}, 0.5), DomainError);
}

TEST_CASE("heston: kernel agrees with the direct pricer") {
    HestonParams p;
    const HestonKernel kern(p, 0.36, 0.0);
    for (double s : {80.0, 100.0, 120.0})
        CHECK(kern.price(s, 100.0, OptionKind::call) ==
              doctest::Approx(heston_price_cf(s, call(100, 0.36), p)).epsilon(1e-12));
}

TEST_CASE("heston: cf price within 3 standard errors of monte carlo") {
    HestonParams p;
    SimOptions o;
    o.n_paths = 40000;
    o.n_steps = 90;
    o.seed = 17;
    o.antithetic = true;
    const PathSet ps = simulate_heston(p, o);
    const McEstimate mc = mc_price(ps, call(100.0, 0.36));
    const double cf = heston_price_cf(100.0, call(100.0, 0.36), p);
    CHECK(std::abs(cf - mc.price) < 3.0 * mc.std_error);
}

TEST_CASE("mc: deterministic paths and bs agreement") {
    SimOptions o;
    o.n_paths = 4;
    o.n_steps = 50;
    const McEstimate flat = mc_price(simulate_gbm({0.0, 0.0, 110.0}, o), call(100.0, 0.2));
    CHECK(flat.price == doctest::Approx(10.0));
    CHECK(flat.std_error == 0.0);

    o.n_paths = 100000;
    o.n_steps = 250;
    o.seed = 2;
    o.antithetic = true;
    const McEstimate mc = mc_price(simulate_gbm({0.05, 0.2, 100.0}, o), call(100.0, 1.0, 0.05));
    CHECK(std::abs(mc.price - bs_price(100.0, call(100.0, 1.0, 0.05), 0.2)) < 3.0 * mc.std_error);

    // The rate must equal the drift the paths were simulated with.
    CHECK_THROWS_AS(mc_price(simulate_gbm({0.06, 0.2, 100.0}, o), call(100.0, 1.0, 0.0)), DomainError);
}

TEST_CASE("mc: antithetic pairing reduces the standard error") {
    SimOptions o;
    o.n_paths = 20000;
    o.n_steps = 25;
    o.seed = 4;
    const GbmParams g{0.0, 0.2, 100.0};
    const McEstimate plain = mc_price(simulate_gbm(g, o), call(100.0, 0.1));
    o.antithetic = true;
    const McEstimate anti = mc_price(simulate_gbm(g, o), call(100.0, 0.1));
    CHECK(anti.std_error / plain.std_error < 0.9);
}
