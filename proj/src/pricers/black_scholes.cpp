#include "finn/pricers/black_scholes.hpp"

#include <cmath>
#include <numbers>

namespace finn {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

void require_spot(double spot) {
    if (!(spot > 0.0) || !std::isfinite(spot)) {
        throw DomainError("black-scholes: spot must be positive and finite");
    }
}

}  // namespace

double bs_price(double spot, const OptionSpec& opt, double sigma) {
    require_spot(spot);
    require_valid(opt);
    if (!std::isfinite(sigma)) throw DomainError("black-scholes: non-finite sigma");
    const double k = opt.strike;
    if (opt.ttm == 0.0) {
        return payoff(opt.kind, spot, k);
    }
    const double df = opt.discount();
    if (sigma <= 0.0) {
        return payoff(opt.kind, spot, k * df);
    }
    const double vol_sqrt_t = sigma * std::sqrt(opt.ttm);
    const double d1 = (std::log(spot / k) + (opt.rate + 0.5 * sigma * sigma) * opt.ttm) / vol_sqrt_t;
    const double d2 = d1 - vol_sqrt_t;
    if (opt.kind == OptionKind::call) {
        return spot * norm_cdf(d1) - k * df * norm_cdf(d2);
    }
    return k * df * norm_cdf(-d2) - spot * norm_cdf(-d1);
}

Greeks bs_greeks(double spot, const OptionSpec& opt, double sigma) {
    require_spot(spot);
    require_valid(opt);
    if (opt.ttm == 0.0) {
        throw DomainError("black-scholes: Greeks are undefined at expiry");
    }
    if (!(sigma > 0.0)) {
        throw DomainError("black-scholes: Greeks need sigma > 0");
    }
    const double vol_sqrt_t = sigma * std::sqrt(opt.ttm);
    const double d1 =
        (std::log(spot / opt.strike) + (opt.rate + 0.5 * sigma * sigma) * opt.ttm) / vol_sqrt_t;
    const double nd1 = norm_cdf(d1);
    return {opt.kind == OptionKind::call ? nd1 : nd1 - 1.0,
            norm_pdf(d1) / (spot * vol_sqrt_t)};
}

}  // namespace finn
