#include "finn/model/mlp.hpp"

#include <array>
#include <cmath>
#include <string>

#include "finn/error.hpp"
#include "finn/random.hpp"

namespace finn {

namespace {

constexpr int H = MlpParams::kHidden;

template <class S>
void check_layer(const S& x, int layer) {
    if constexpr (std::is_same_v<S, ad::Jet2>) {
        if (!std::isfinite(x.value) || !std::isfinite(x.d1) || !std::isfinite(x.d2)) {
            throw NumericError("network: non-finite activation in layer " + std::to_string(layer));
        }
    }
}

// Shared by the jet evaluation and the tape recording. `p(i)` yields the
// i-th flat parameter either as a plain double or as a tape node.
template <class S, class P>
S mlp_forward(const P& p, const S& m_raw, const S& tau_raw) {
    using IS = InputScaling;
    const S m = (m_raw - IS::kMoneynessCenter) * (1.0 / IS::kMoneynessScale);
    const S tau = (tau_raw - IS::kTtmCenter) * (1.0 / IS::kTtmScale);
    std::array<S, H> a1;
    for (int i = 0; i < H; ++i) {
        S z = p(MlpParams::kW1 + i) * m + p(MlpParams::kW1 + H + i) * tau;
        z = z + p(MlpParams::kB1 + i);
        a1[i] = tanh(z);
        check_layer(a1[i], 1);
    }
    std::array<S, H> a2;
    for (int i = 0; i < H; ++i) {
        // w2 is column-major: element (i, j) at kW2 + j * H + i.
        S z = p(MlpParams::kW2 + i) * a1[0];
        for (int j = 1; j < H; ++j) {
            z = z + p(MlpParams::kW2 + j * H + i) * a1[j];
        }
        z = z + p(MlpParams::kB2 + i);
        a2[i] = tanh(z);
        check_layer(a2[i], 2);
    }
    S z = p(MlpParams::kW3) * a2[0];
    for (int j = 1; j < H; ++j) {
        z = z + p(MlpParams::kW3 + j) * a2[j];
    }
    z = z + p(MlpParams::kB3);
    S g = softplus(z);
    check_layer(g, 3);
    return g;
}

}  // namespace

MlpParams init_params(std::uint64_t seed) {
    MlpParams params;
    params.meta.seed = seed;
    const rng::CounterRng gen(seed, rng::Stream::init);
    auto theta = params.values();
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
        const double limit = std::sqrt(3.0 / fan_in);
        for (std::size_t i = 0; i < count; ++i) {
            const double u = gen.uniforms(offset + i, 0)[0];
            theta[offset + i] = limit * (2.0 * u - 1.0);
        }
    };
    fill(MlpParams::kW1, H * MlpParams::kInputs, MlpParams::kInputs);
    fill(MlpParams::kW2, H * H, H);
    fill(MlpParams::kW3, H, H);
    return params;
}

ad::Jet2 forward_jet(const MlpParams& params, const ModelInput& input) {
    if (!(input.moneyness > 0.0) || !std::isfinite(input.moneyness)) {
        throw DomainError("network: moneyness must be positive and finite");
    }
    if (!(input.ttm >= 0.0) || !std::isfinite(input.ttm)) {
        throw DomainError("network: ttm must be non-negative and finite");
    }
    const auto theta = params.values();
    auto p = [&](std::size_t i) { return theta[i]; };
    return mlp_forward(p, ad::lift_seed(input.moneyness), ad::lift_const(input.ttm));
}

ad::Var record_forward(std::span<const ad::Var> params, ad::Var moneyness, ad::Var ttm) {
    if (params.size() != MlpParams::kCount) {
        throw DomainError("record_forward: wrong parameter count");
    }
    auto p = [&](std::size_t i) { return params[i]; };
    return mlp_forward(p, moneyness, ttm);
}

std::vector<ad::Var> register_parameters(ad::Tape& tape, const MlpParams& params) {
    std::vector<ad::Var> out;
    out.reserve(MlpParams::kCount);
    for (double v : params.values()) out.push_back(tape.parameter(v));
    return out;
}

PriceGreeks price_delta_gamma(const MlpParams& params, double spot, const OptionSpec& opt) {
    require_valid(opt);
    if (opt.ttm == 0.0) {
        throw DomainError("network: price/Greeks requested at expiry");
    }
    if (!(spot > 0.0)) throw DomainError("network: spot must be > 0");
    const double scale = opt.strike * opt.discount();
    const ad::Jet2 g = forward_jet(params, {spot / scale, opt.ttm});
    return {scale * g.value, g.d1, g.d2 / scale};
}

ClampedGreeks clamp_greeks(double delta, double gamma, OptionKind kind) {
    ClampedGreeks out{delta, gamma, false, false};
    const double lo = kind == OptionKind::call ? 0.0 : -1.0;
    const double hi = kind == OptionKind::call ? 1.0 : 0.0;
    if (delta < lo || delta > hi) {
        out.delta = std::clamp(delta, lo, hi);
        out.delta_clipped = true;
    }
    if (gamma < 0.0 || gamma > 1.0) {
        out.gamma = std::clamp(gamma, 0.0, 1.0);
        out.gamma_clipped = true;
    }
    return out;
}

}  // namespace finn
