#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "finn/error.hpp"
#include "finn/hedging_loss.hpp"
#include "finn/market_sim.hpp"
#include "finn/model/mlp.hpp"
#include "finn/pricers/black_scholes.hpp"

using namespace finn;

namespace {

PricerFn bs_pricer(double sigma) {
    return [sigma](double s, const OptionSpec& o) {
        const Greeks g = bs_greeks(s, o, sigma);
        return PriceGreeks{bs_price(s, o, sigma), g.delta, g.gamma};
    };
}

// Single-step risk-neutral samples from S = 100 with a 0.36-year call at K = 100.
std::vector<HedgeSample> atm_steps(double sigma, double dt, std::size_t n) {
    SimOptions o;
    o.n_paths = n;
    o.n_steps = 1;
    o.dt = dt;
    o.seed = 77;
    const PathSet ps = simulate_gbm({0.0, sigma, 100.0}, o);
    std::vector<HedgeSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        HedgeSample s;
        s.s_t = ps.spot(i, 0);
        s.s_next = ps.spot(i, 1);
        s.ttm_t = 0.36;
        s.dt = dt;
        s.strike = 100.0;
        out.push_back(s);
    }
    return out;
}

double mean_delta_loss(const PricerFn& f, const std::vector<HedgeSample>& xs) {
    double sum = 0.0;
    for (const auto& s : xs) {
        const double r = delta_hedge_residual(f, s);
        sum += r * r;
    }
    return sum / static_cast<double>(xs.size());
}

MlpParams net(std::uint64_t seed) {
    MlpParams p = init_params(seed);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, 0.2);
    for (int i = 0; i < MlpParams::kHidden; ++i) p.b1()[i] = n(gen);
    p.b3() = -2.0;
    return p;
}

std::vector<HedgeSample> mixed_batch(bool with_quotes, std::size_t n) {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> us(88, 112), uk(90, 110), uz(-2.5, 2.5);
    std::uniform_int_distribution<int> uk_steps(1, 120);
    const AtmQuoter q = AtmQuoter::black_scholes(0.125, 0.0, 30.0 / 250.0, 1.0 / 250.0);
    std::vector<HedgeSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        HedgeSample s;
        s.s_t = us(gen);
        s.s_next = s.s_t * std::exp(0.125 * std::sqrt(s.dt) * uz(gen));
        s.strike = uk(gen);
        s.ttm_t = (i % 7 == 0 ? 1 : uk_steps(gen)) * s.dt;
        if (with_quotes) s.atm = q.quote(s.s_t, s.s_next);
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST_CASE("worked residual") {
    HedgeSample s;
    s.s_t = 120.0;
    s.s_next = 121.0;
    s.ttm_t = 0.2;
    const double r = delta_residual(s, 10.0, 0.5, 11.0);
    CHECK(r == doctest::Approx(-0.5));
    CHECK(r * r == doctest::Approx(0.25));
}

TEST_CASE("constant model has zero delta loss") {
    const PricerFn flat = [](double, const OptionSpec&) { return PriceGreeks{3.0, 0.0, 0.0}; };
    for (const auto& s : atm_steps(0.15, 1.0 / 250.0, 50)) CHECK(delta_hedge_residual(flat, s) == 0.0);
}

TEST_CASE("zero-loss oracle: bs on risk-neutral paths, O(dt^2)") {
    const auto f = bs_pricer(0.15);
    const double l1 = mean_delta_loss(f, atm_steps(0.15, 1.0 / 250.0, 100000));
    const double l2 = mean_delta_loss(f, atm_steps(0.15, 0.5 / 250.0, 100000));
    CHECK(l1 <= 1e-3);
    CHECK(l1 / l2 == doctest::Approx(4.0).epsilon(0.3));
}

TEST_CASE("expiry step uses the payoff") {
    HedgeSample s;
    s.s_t = 105.0;
    s.s_next = 106.0;
    s.ttm_t = s.dt;
    CHECK(s.terminal());
    const PricerFn f = [](double, const OptionSpec&) { return PriceGreeks{5.5, 1.0, 0.0}; };
    // delta 1 * 1 - (6 - 5.5)
    CHECK(delta_hedge_residual(f, s) == doctest::Approx(0.5));
    s.ttm_t = 0.5 * s.dt;
    CHECK_THROWS_AS(require_valid(s), DomainError);
}

TEST_CASE("delta-gamma portfolio identities") {
    const double dt = 1.0 / 250.0, atm_ttm = 30.0 / 250.0, sigma = 0.15;
    const AtmQuoter q = AtmQuoter::black_scholes(sigma, 0.0, atm_ttm, dt);

    SUBCASE("the hedging option hedges itself") {
        HedgeSample s;
        s.s_t = 100.0;
        s.s_next = 100.8;
        s.strike = 100.0;
        s.ttm_t = atm_ttm;
        s.atm = q.quote(s.s_t, s.s_next);
        const PortfolioPair p = delta_gamma_portfolio_pair(bs_pricer(sigma), s);
        CHECK(p.beta == doctest::Approx(1.0));
        CHECK(std::abs(p.alpha) < 1e-12);
        CHECK(std::abs(p.v_t) < 1e-12);
        CHECK(std::abs(p.v_next) < 1e-12);
    }
    SUBCASE("zero gamma reduces to the delta hedge") {
        const PricerFn lin = [](double spot, const OptionSpec& o) {
            return PriceGreeks{0.6 * spot - 0.5 * o.strike, 0.6, 0.0};
        };
        for (const auto& s0 : atm_steps(sigma, dt, 20)) {
            HedgeSample s = s0;
            s.atm = q.quote(s.s_t, s.s_next);
            const PortfolioPair p = delta_gamma_portfolio_pair(lin, s);
            CHECK(p.beta == 0.0);
            CHECK(p.alpha == doctest::Approx(0.6));
            CHECK(p.v_t - p.v_next == doctest::Approx(-delta_hedge_residual(lin, s)).epsilon(1e-12));
        }
    }
    SUBCASE("gamma hedging beats delta hedging for the true price") {
        const auto f = bs_pricer(sigma);
        double dsum = 0.0, gsum = 0.0;
        const auto xs = atm_steps(sigma, dt, 10000);
        for (auto s : xs) {
            s.atm = q.quote(s.s_t, s.s_next);
            const double r = delta_hedge_residual(f, s);
            const PortfolioPair p = delta_gamma_portfolio_pair(f, s);
            dsum += r * r;
            gsum += (p.v_t - p.v_next) * (p.v_t - p.v_next);
        }
        CHECK(gsum < dsum);
    }
    SUBCASE("quote floor") {
        HedgeSample s;
        s.ttm_t = 0.3;
        CHECK_THROWS_AS(delta_gamma_portfolio_pair(bs_pricer(sigma), s), DomainError);
        s.atm = AtmQuote{1.0, 1.0, 0.5, 0.0};
        CHECK_THROWS_AS(delta_gamma_portfolio_pair(bs_pricer(sigma), s), DomainError);
    }
}

TEST_CASE("atm quotes") {
    const AtmQuote a = make_atm_quote(AtmEngine::black_scholes, 100.0, 100.0, 0.0, 30.0 / 250.0,
                                      1.0 / 250.0, 0.15);
    CHECK(a.delta > 0.5);
    CHECK(a.delta < 0.56);
    CHECK(a.gamma > 0.0);
    for (double t : {0.12, 0.36}) {
        const AtmQuote b = make_atm_quote(AtmEngine::black_scholes, 100.0, 101.0, 0.0, t, 1.0 / 250.0, 0.15);
        CHECK(b.price_next > b.price_t);
        const AtmQuote h = make_atm_quote(AtmEngine::heston_cf, 100.0, 101.0, 0.0, t, 1.0 / 250.0, 0.15);
        CHECK(h.gamma > 0.0);
        CHECK(h.price_next > h.price_t);
    }
    // Same spot, shrinking step: the next price tends to the current one.
    const AtmQuote c = make_atm_quote(AtmEngine::black_scholes, 100.0, 100.0, 0.0, 0.12, 1e-8, 0.15);
    CHECK(c.price_next == doctest::Approx(c.price_t).epsilon(1e-6));
    CHECK_THROWS_AS(make_atm_quote(AtmEngine::black_scholes, 100, 100, 0, 0.004, 0.004, 0.15), DomainError);
}

TEST_CASE("batch loss equals the per-sample residuals") {
    const MlpParams p = net(3);
    HedgeWorkspace w;
    for (HedgeMode mode : {HedgeMode::delta, HedgeMode::delta_gamma}) {
        const auto batch = mixed_batch(mode == HedgeMode::delta_gamma, 45);
        double sum = 0.0;
        for (const auto& s : batch) {
            double r;
            if (mode == HedgeMode::delta) {
                r = delta_hedge_residual(p, s);
            } else {
                const PortfolioPair pp = delta_gamma_portfolio_pair(p, s);
                r = pp.v_t - pp.v_next;
            }
            sum += r * r;
        }
        const BatchLoss b = hedge_batch_loss(p, batch, mode, w, {});
        CHECK(b.loss == doctest::Approx(sum / 45.0).epsilon(1e-11));
    }
}

TEST_CASE("batch gradient matches finite differences") {
    HedgeWorkspace w;
    for (HedgeMode mode : {HedgeMode::delta, HedgeMode::delta_gamma}) {
        const double tol = mode == HedgeMode::delta ? 1e-6 : 1e-4;
        MlpParams p = net(5);
        const auto batch = mixed_batch(mode == HedgeMode::delta_gamma, 40);
        std::vector<double> g(MlpParams::kCount);
        hedge_batch_loss(p, batch, mode, w, g);
        double gmax = 0.0;
        for (double x : g) gmax = std::max(gmax, std::abs(x));
        REQUIRE(gmax > 0.0);
        double worst = 0.0;
        auto theta = p.values();
        for (std::size_t k = 0; k < MlpParams::kCount; k += 3) {
            const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
            const double keep = theta[k];
            theta[k] = keep + h;
            const double up = hedge_batch_loss(p, batch, mode, w, {}).loss;
            theta[k] = keep - h;
            const double dn = hedge_batch_loss(p, batch, mode, w, {}).loss;
            theta[k] = keep;
            worst = std::max(worst, std::abs((up - dn) / (2 * h) - g[k]));
        }
        CHECK(worst <= tol * gmax);
    }
}

TEST_CASE("detached next-step gradient") {
    HedgeWorkspace w;
    const MlpParams p = net(8);
    AlignedVector full(MlpParams::kCount), det(MlpParams::kCount);

    auto batch = mixed_batch(false, 30);
    const BatchLoss a = hedge_batch_loss(p, batch, HedgeMode::delta, w, full, NextGradient::full);
    const BatchLoss b = hedge_batch_loss(p, batch, HedgeMode::delta, w, det, NextGradient::detached);
    CHECK(a.loss == b.loss);
    CHECK(full != det);

    // Expiry steps have no network price at the far end, so both agree.
    for (auto& s : batch) s.ttm_t = s.dt;
    hedge_batch_loss(p, batch, HedgeMode::delta, w, full, NextGradient::full);
    hedge_batch_loss(p, batch, HedgeMode::delta, w, det, NextGradient::detached);
    CHECK(full == det);
}

TEST_CASE("target network prices the next step") {
    HedgeWorkspace w;
    const MlpParams p = net(8);
    const MlpParams q = net(9);
    const auto batch = mixed_batch(false, 30);
    AlignedVector g_self(MlpParams::kCount), g_same(MlpParams::kCount), g_other(MlpParams::kCount);

    const BatchLoss a = hedge_batch_loss(p, batch, HedgeMode::delta, w, g_self, NextGradient::detached);
    const BatchLoss b =
        hedge_batch_loss(p, batch, HedgeMode::delta, w, g_same, NextGradient::detached, &p);
    CHECK(a.loss == b.loss);
    CHECK(g_self == g_same);

    // Residuals against a different target, computed one sample at a time.
    double expect = 0.0;
    for (const auto& s : batch) {
        const double kt = s.strike, kn = s.strike;
        const ad::Jet2 j = forward_jet(p, {s.s_t / kt, s.ttm_t});
        const double next = s.terminal() ? std::max(s.s_next - s.strike, 0.0)
                                         : kn * forward_jet(q, {s.s_next / kn, s.ttm_t - s.dt}).value;
        const double res = (kt * j.value - next) + std::clamp(j.d1, 0.0, 1.0) * (s.s_next - s.s_t);
        expect += res * res;
    }
    expect /= static_cast<double>(batch.size());
    const BatchLoss c =
        hedge_batch_loss(p, batch, HedgeMode::delta, w, g_other, NextGradient::detached, &q);
    CHECK(c.loss == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g_other != g_self);

    // The target receives no gradient even in full mode.
    AlignedVector g_full(MlpParams::kCount);
    hedge_batch_loss(p, batch, HedgeMode::delta, w, g_full, NextGradient::full, &q);
    CHECK(g_full == g_other);
}
