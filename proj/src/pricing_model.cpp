#include "finn/pricing_model.hpp"

#include <vector>

#include "finn/error.hpp"
#include "finn/model/mlp_batch.hpp"
#include "finn/pricers/black_scholes.hpp"

namespace finn {

namespace {

void check_sizes(std::span<const double> spots, std::span<PriceGreeks> out) {
    if (spots.size() != out.size()) throw DomainError("evaluate: output size mismatch");
}

}  // namespace

void NetworkModel::evaluate(std::span<const double> spots, const OptionSpec& opt,
                            std::span<PriceGreeks> out) const {
    check_sizes(spots, out);
    require_valid(opt);
    if (opt.ttm == 0.0) throw DomainError("network: price/Greeks requested at expiry");
    const double scale = opt.strike * opt.discount();
    constexpr std::size_t kChunk = 64;
    MlpBatch batch;
    std::vector<double> m;
    std::vector<double> tau;
    for (std::size_t start = 0; start < spots.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, spots.size() - start);
        m.resize(n);
        tau.assign(n, opt.ttm);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(spots[start + i] > 0.0)) throw DomainError("network: spot must be > 0");
            m[i] = spots[start + i] / scale;
        }
        batch.forward(params_, m, tau, true);
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<Eigen::Index>(i);
            out[start + i] = {scale * batch.value()[j], batch.d1()[j], batch.d2()[j] / scale};
        }
    }
}

void BlackScholesModel::evaluate(std::span<const double> spots, const OptionSpec& opt,
                                 std::span<PriceGreeks> out) const {
    check_sizes(spots, out);
    for (std::size_t i = 0; i < spots.size(); ++i) {
        const Greeks g = bs_greeks(spots[i], opt, sigma_);
        out[i] = {bs_price(spots[i], opt, sigma_), g.delta, g.gamma};
    }
}

HestonModel::HestonModel(HestonParams p, QuadratureConfig q, double bump_rel)
    : params_(p), quad_(q), bump_rel_(bump_rel) {
    require_valid(params_);
    require_valid(quad_);
}

const HestonKernel& HestonModel::kernel(double ttm, double rate) const {
    auto& slot = kernels_[{ttm, rate}];
    if (!slot) slot = std::make_unique<HestonKernel>(params_, ttm, rate, quad_);
    return *slot;
}

void HestonModel::evaluate(std::span<const double> spots, const OptionSpec& opt,
                           std::span<PriceGreeks> out) const {
    check_sizes(spots, out);
    require_valid(opt);
    if (opt.ttm == 0.0) throw DomainError("heston: Greeks are undefined at expiry");
    const HestonKernel& k = kernel(opt.ttm, opt.rate);
    for (std::size_t i = 0; i < spots.size(); ++i) {
        const Greeks g = heston_greeks_bump(k, spots[i], opt.strike, opt.kind, bump_rel_);
        out[i] = {k.price(spots[i], opt.strike, opt.kind), g.delta, g.gamma};
    }
}

}  // namespace finn
