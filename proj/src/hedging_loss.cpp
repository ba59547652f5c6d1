#include "finn/hedging_loss.hpp"

#include <cmath>
#include <string>

#include "finn/error.hpp"
#include "finn/pricers/black_scholes.hpp"

namespace finn {

namespace {

constexpr double kTimeTol = 1e-10;

void require_quote(const HedgeSample& s) {
    if (!s.atm) throw DomainError("delta-gamma step needs a hedging-option quote");
    if (!(s.atm->gamma > kGammaFloor)) {
        throw DomainError("hedging option gamma " + std::to_string(s.atm->gamma) +
                          " at or below floor");
    }
}

double next_price(const PricerFn& model, const HedgeSample& s) {
    if (s.terminal()) return payoff(s.kind, s.s_next, s.strike);
    return model(s.s_next, s.option_next()).price;
}

}  // namespace

const char* to_string(HedgeMode m) { return m == HedgeMode::delta ? "delta" : "delta_gamma"; }

const char* to_string(NextGradient g) { return g == NextGradient::full ? "full" : "detached"; }

bool HedgeSample::terminal() const { return std::abs(ttm_t - dt) <= kTimeTol; }

void require_valid(const HedgeSample& s) {
    if (!(s.s_t > 0.0) || !(s.s_next > 0.0)) throw DomainError("hedge step: spots must be > 0");
    if (!(s.dt > 0.0)) throw DomainError("hedge step: dt must be > 0");
    if (!(s.strike > 0.0)) throw DomainError("hedge step: strike must be > 0");
    if (s.ttm_t - s.dt < -kTimeTol) {
        throw DomainError("hedge step crosses expiry: ttm " + std::to_string(s.ttm_t) +
                          " < dt " + std::to_string(s.dt));
    }
}

double delta_residual(const HedgeSample& s, double price_t, double delta, double price_next) {
    return delta * (s.s_next - s.s_t) + s.rate * (price_t - delta * s.s_t) * s.dt -
           (price_next - price_t);
}

PortfolioPair portfolio_pair(const HedgeSample& s, double price_t, double delta, double gamma,
                             double price_next) {
    require_quote(s);
    const AtmQuote& a = *s.atm;
    PortfolioPair p;
    p.beta = gamma / a.gamma;
    p.alpha = delta - p.beta * a.delta;
    p.v_t = -price_t + p.alpha * s.s_t + p.beta * a.price_t;
    p.v_next = -price_next + p.alpha * s.s_next + p.beta * a.price_next;
    return p;
}

double delta_hedge_residual(const PricerFn& model, const HedgeSample& s) {
    require_valid(s);
    const PriceGreeks now = model(s.s_t, s.option_t());
    const double delta = clamp_greeks(now.delta, now.gamma, s.kind).delta;
    return delta_residual(s, now.price, delta, next_price(model, s));
}

double delta_hedge_residual(const MlpParams& params, const HedgeSample& s) {
    return delta_hedge_residual(network_pricer(params), s);
}

PortfolioPair delta_gamma_portfolio_pair(const PricerFn& model, const HedgeSample& s) {
    require_valid(s);
    require_quote(s);
    const PriceGreeks now = model(s.s_t, s.option_t());
    const ClampedGreeks c = clamp_greeks(now.delta, now.gamma, s.kind);
    return portfolio_pair(s, now.price, c.delta, c.gamma, next_price(model, s));
}

PortfolioPair delta_gamma_portfolio_pair(const MlpParams& params, const HedgeSample& s) {
    return delta_gamma_portfolio_pair(network_pricer(params), s);
}

PricerFn network_pricer(const MlpParams& params) {
    return [&params](double spot, const OptionSpec& opt) {
        return price_delta_gamma(params, spot, opt);
    };
}

AtmQuoter AtmQuoter::black_scholes(double sigma, double rate, double atm_ttm, double dt) {
    if (!(sigma > 0.0)) throw DomainError("atm quote: sigma must be > 0");
    if (!(atm_ttm > dt)) throw DomainError("atm quote: hedging option must outlive the step");
    AtmQuoter q;
    q.engine_ = AtmEngine::black_scholes;
    q.sigma_ = sigma;
    q.rate_ = rate;
    q.atm_ttm_ = atm_ttm;
    q.dt_ = dt;
    return q;
}

AtmQuoter AtmQuoter::heston(const HestonParams& p, double rate, double atm_ttm, double dt,
                            const QuadratureConfig& quad) {
    if (!(atm_ttm > dt)) throw DomainError("atm quote: hedging option must outlive the step");
    AtmQuoter q;
    q.engine_ = AtmEngine::heston_cf;
    q.rate_ = rate;
    q.atm_ttm_ = atm_ttm;
    q.dt_ = dt;
    q.k_t_ = std::make_shared<HestonKernel>(p, atm_ttm, rate, quad);
    q.k_next_ = std::make_shared<HestonKernel>(p, atm_ttm - dt, rate, quad);
    return q;
}

AtmQuote AtmQuoter::quote(double s_t, double s_next) const {
    const double strike = s_t;
    AtmQuote a;
    if (engine_ == AtmEngine::black_scholes) {
        const OptionSpec now{strike, atm_ttm_, rate_, OptionKind::call};
        const OptionSpec next{strike, atm_ttm_ - dt_, rate_, OptionKind::call};
        const Greeks g = bs_greeks(s_t, now, sigma_);
        a.price_t = bs_price(s_t, now, sigma_);
        a.price_next = bs_price(s_next, next, sigma_);
        a.delta = g.delta;
        a.gamma = g.gamma;
    } else {
        const Greeks g = heston_greeks_bump(*k_t_, s_t, strike, OptionKind::call);
        a.price_t = k_t_->price(s_t, strike, OptionKind::call);
        a.price_next = k_next_->price(s_next, strike, OptionKind::call);
        a.delta = g.delta;
        a.gamma = g.gamma;
    }
    return a;
}

AtmQuote make_atm_quote(AtmEngine engine, double s_t, double s_next, double rate,
                        double atm_ttm, double dt, double sigma, const HestonParams& heston) {
    const AtmQuoter q = engine == AtmEngine::black_scholes
                            ? AtmQuoter::black_scholes(sigma, rate, atm_ttm, dt)
                            : AtmQuoter::heston(heston, rate, atm_ttm, dt);
    return q.quote(s_t, s_next);
}

BatchLoss hedge_batch_loss(const MlpParams& params, std::span<const HedgeSample> batch,
                           HedgeMode mode, HedgeWorkspace& w, std::span<double> grad,
                           NextGradient next, const MlpParams* next_params) {
    const std::size_t n = batch.size();
    if (n == 0) throw DomainError("hedge loss: empty batch");
    if (!grad.empty() && grad.size() != MlpParams::kCount) {
        throw DomainError("hedge loss: gradient buffer has wrong size");
    }
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

    BatchLoss out;
    double sum = 0.0;
    // Sub-chunks keep the jet activations cache resident.
    constexpr std::size_t kChunk = 16;
    for (std::size_t lo = 0; lo < n; lo += kChunk) {
        const std::span<const HedgeSample> chunk = batch.subspan(lo, std::min(kChunk, n - lo));
        const std::size_t m = chunk.size();
        w.m_t.resize(m);
        w.tau_t.resize(m);
        w.m_next.resize(m);
        w.tau_next.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const HedgeSample& s = chunk[i];
            require_valid(s);
            if (mode == HedgeMode::delta_gamma) require_quote(s);
            const double tau_n = s.ttm_next();
            w.m_t[i] = s.s_t / (s.strike * std::exp(-s.rate * s.ttm_t));
            w.tau_t[i] = s.ttm_t;
            w.m_next[i] = s.s_next / (s.strike * std::exp(-s.rate * tau_n));
            w.tau_next[i] = tau_n;
        }
        w.net_t.forward(params, w.m_t, w.tau_t, true);
        w.net_next.forward(next_params ? *next_params : params, w.m_next, w.tau_next, false);

        const auto mb = static_cast<Eigen::Index>(m);
        if (want_grad) {
            w.adj_v.setZero(mb);
            w.adj_1.setZero(mb);
            w.adj_2.setZero(mb);
            w.adj_next.setZero(mb);
        }
        for (std::size_t i = 0; i < m; ++i) {
            const HedgeSample& s = chunk[i];
            const auto j = static_cast<Eigen::Index>(i);
            const double kt = s.strike * std::exp(-s.rate * s.ttm_t);
            const double kn = s.strike * std::exp(-s.rate * w.tau_next[i]);
            const double price_t = kt * w.net_t.value()[j];
            const double raw_delta = w.net_t.d1()[j];
            const double raw_gamma = w.net_t.d2()[j] / kt;
            const ClampedGreeks c = clamp_greeks(raw_delta, raw_gamma, s.kind);
            out.delta_clips += c.delta_clipped;
            out.gamma_clips += c.gamma_clipped;
            const bool terminal = s.terminal();
            const double price_n =
                terminal ? payoff(s.kind, s.s_next, s.strike) : kn * w.net_next.value()[j];

            double res = 0.0;
            double d_price_t = 0.0;
            double d_delta = 0.0;
            double d_gamma = 0.0;
            double d_price_n = 0.0;
            if (mode == HedgeMode::delta) {
                res = delta_residual(s, price_t, c.delta, price_n);
                d_price_t = 1.0 + s.rate * s.dt;
                d_delta = (s.s_next - s.s_t) - s.rate * s.s_t * s.dt;
                d_price_n = -1.0;
            } else {
                const PortfolioPair p = portfolio_pair(s, price_t, c.delta, c.gamma, price_n);
                res = p.v_t - p.v_next;
                const AtmQuote& a = *s.atm;
                d_price_t = -1.0;
                d_delta = s.s_t - s.s_next;
                d_gamma = ((a.price_t - a.price_next) - a.delta * (s.s_t - s.s_next)) / a.gamma;
                d_price_n = 1.0;
            }
            sum += res * res;
            if (want_grad) {
                const double c2 = 2.0 * res / static_cast<double>(n);
                w.adj_v[j] = c2 * d_price_t * kt;
                w.adj_1[j] = c.delta_clipped ? 0.0 : c2 * d_delta;
                w.adj_2[j] = c.gamma_clipped ? 0.0 : c2 * d_gamma / kt;
                w.adj_next[j] = terminal ? 0.0 : c2 * d_price_n * kn;
            }
        }
        if (want_grad) {
            w.net_t.backward(params, w.adj_v, w.adj_1, w.adj_2, grad);
            static const Eigen::ArrayXd kEmpty;
            if (next == NextGradient::full && !next_params)
                w.net_next.backward(params, w.adj_next, kEmpty, kEmpty, grad);
        }
    }
    out.loss = sum / static_cast<double>(n);
    return out;
}

}  // namespace finn
