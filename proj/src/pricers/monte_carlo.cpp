#include "finn/pricers/monte_carlo.hpp"

#include <cmath>
#include <string>

#include "finn/error.hpp"

namespace finn {

McEstimate mc_price(const PathSet& paths, const OptionSpec& opt) {
    require_valid(opt);
    if (std::abs(paths.drift() - opt.rate) > 1e-12) {
        throw DomainError("mc_price: paths were simulated with drift " +
                          std::to_string(paths.drift()) + " but the option rate is " +
                          std::to_string(opt.rate) + "; paths must be risk-neutral");
    }
    const double steps = opt.ttm / paths.dt();
    const auto step = static_cast<std::size_t>(std::llround(steps));
    if (step > paths.n_steps()) {
        throw DomainError("mc_price: ttm beyond the path horizon");
    }
    const double df = std::exp(-opt.rate * paths.time(step));

    // One sample per path, or per antithetic pair.
    const std::size_t group = paths.antithetic() ? 2 : 1;
    const std::size_t n = paths.n_paths() / group;
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = 0.0;
        for (std::size_t j = 0; j < group; ++j) {
            x += payoff(opt.kind, paths.spot(i * group + j, step), opt.strike);
        }
        x /= static_cast<double>(group);
        // Welford update, fixed order.
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {df * mean, df * std::sqrt(var / static_cast<double>(n))};
}

}  // namespace finn
