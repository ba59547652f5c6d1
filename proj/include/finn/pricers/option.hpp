#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "finn/error.hpp"

namespace finn {

enum class OptionKind { call, put };

inline const char* to_string(OptionKind k) { return k == OptionKind::call ? "call" : "put"; }

struct OptionSpec {
    double strike = 100.0;
    double ttm = 0.0;   // years
    double rate = 0.0;  // continuously compounded, per year
    OptionKind kind = OptionKind::call;

    double discount() const { return std::exp(-rate * ttm); }
};

struct Greeks {
    double delta = 0.0;
    double gamma = 0.0;
};

struct PriceGreeks {
    double price = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
};

inline void require_valid(const OptionSpec& o) {
    if (!std::isfinite(o.strike) || !std::isfinite(o.ttm) || !std::isfinite(o.rate)) {
        throw DomainError("option: non-finite field");
    }
    if (!(o.strike > 0.0)) throw DomainError("option: strike must be > 0");
    if (o.ttm < 0.0) throw DomainError("option: ttm must be >= 0");
}

inline double payoff(OptionKind kind, double spot, double strike) {
    return kind == OptionKind::call ? std::max(spot - strike, 0.0)
                                    : std::max(strike - spot, 0.0);
}

}  // namespace finn
