#pragma once

#include "finn/pricers/option.hpp"

namespace finn {

double norm_cdf(double x);
double norm_pdf(double x);

/// Black-Scholes price of a European option. At ttm = 0 the payoff is
/// returned. With sigma <= 0 and ttm > 0 the deterministic limit, the
/// discounted intrinsic value max(S - K e^{-r tau}, 0) (call), is returned.
double bs_price(double spot, const OptionSpec& opt, double sigma);

/// Closed-form delta and gamma; requires ttm > 0 and sigma > 0.
Greeks bs_greeks(double spot, const OptionSpec& opt, double sigma);

}  // namespace finn
