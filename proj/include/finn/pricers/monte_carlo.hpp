#pragma once

#include "finn/market_sim.hpp"
#include "finn/pricers/option.hpp"

namespace finn {

struct McEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

/// Discounted mean payoff at the grid time nearest opt.ttm. The paths must
/// be risk-neutral (drift equal to opt.rate). For antithetic path sets the
/// standard error is computed from pair averages.
McEstimate mc_price(const PathSet& paths, const OptionSpec& opt);

}  // namespace finn
