#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "finn/market_sim.hpp"
#include "finn/model/mlp.hpp"
#include "finn/model/mlp_batch.hpp"
#include "finn/pricers/heston.hpp"
#include "finn/pricers/option.hpp"

namespace finn {

/// Hedging-option gammas at or below this are rejected.
inline constexpr double kGammaFloor = 1e-6;

enum class HedgeMode { delta, delta_gamma };
const char* to_string(HedgeMode m);

/// How the gradient treats the next-step price. `full` differentiates the
/// squared residual through both ends of the step; `detached` holds the
/// next-step price fixed, like a bootstrapped target.
enum class NextGradient { full, detached };
const char* to_string(NextGradient g);

/// Market quote of the at-the-money hedging option (strike fixed at s_t)
/// at both ends of the step.
struct AtmQuote {
    double price_t = 0.0;
    double price_next = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
};

/// One hedging step: the option (strike, kind) has ttm_t left at s_t and
/// ttm_t - dt at s_next. When ttm_t == dt the step ends at expiry and the
/// next value is the payoff.
struct HedgeSample {
    double s_t = 100.0;
    double s_next = 100.0;
    double ttm_t = 0.0;
    double dt = 1.0 / 250.0;
    double rate = 0.0;
    double strike = 100.0;
    OptionKind kind = OptionKind::call;
    std::optional<AtmQuote> atm;

    OptionSpec option_t() const { return {strike, ttm_t, rate, kind}; }
    OptionSpec option_next() const { return {strike, ttm_next(), rate, kind}; }
    double ttm_next() const { return terminal() ? 0.0 : ttm_t - dt; }
    bool terminal() const;
};

/// Throws DomainError if the step would cross expiry or a field is invalid.
void require_valid(const HedgeSample& s);

/// Self-financing delta-hedge residual with model quantities already
/// evaluated:
///   delta (s_next - s_t) + r (price_t - delta s_t) dt - (price_next - price_t).
double delta_residual(const HedgeSample& s, double price_t, double delta, double price_next);

/// Short option, alpha shares and beta hedging options (beta = gamma /
/// gamma_atm, alpha = delta - beta delta_atm), valued at both ends.
struct PortfolioPair {
    double v_t = 0.0;
    double v_next = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};
PortfolioPair portfolio_pair(const HedgeSample& s, double price_t, double delta, double gamma,
                             double price_next);

/// Price and Greeks of one contract at one spot; any model will do.
using PricerFn = std::function<PriceGreeks(double spot, const OptionSpec& opt)>;

/// The residual under `model`, with the hedge ratio clamped like in
/// training. Works for any pricer, which is what makes the zero-loss check
/// against Black-Scholes possible.
double delta_hedge_residual(const PricerFn& model, const HedgeSample& s);
double delta_hedge_residual(const MlpParams& params, const HedgeSample& s);

/// Requires s.atm with gamma above kGammaFloor.
PortfolioPair delta_gamma_portfolio_pair(const PricerFn& model, const HedgeSample& s);
PortfolioPair delta_gamma_portfolio_pair(const MlpParams& params, const HedgeSample& s);

PricerFn network_pricer(const MlpParams& params);

enum class AtmEngine { black_scholes, heston_cf };

/// Quotes the at-the-money hedging option with a fixed remaining life
/// atm_ttm at t and atm_ttm - dt at t + dt. Heston kernels are built once.
class AtmQuoter {
public:
    static AtmQuoter black_scholes(double sigma, double rate, double atm_ttm, double dt);
    static AtmQuoter heston(const HestonParams& p, double rate, double atm_ttm, double dt,
                            const QuadratureConfig& q = {});

    AtmQuote quote(double s_t, double s_next) const;
    AtmEngine engine() const { return engine_; }

private:
    AtmQuoter() = default;

    AtmEngine engine_ = AtmEngine::black_scholes;
    double sigma_ = 0.0;
    double rate_ = 0.0;
    double atm_ttm_ = 0.0;
    double dt_ = 0.0;
    std::shared_ptr<const HestonKernel> k_t_;
    std::shared_ptr<const HestonKernel> k_next_;
};

AtmQuote make_atm_quote(AtmEngine engine, double s_t, double s_next, double rate,
                        double atm_ttm, double dt, double sigma,
                        const HestonParams& heston = {});

struct BatchLoss {
    double loss = 0.0;  // mean squared residual
    std::size_t delta_clips = 0;
    std::size_t gamma_clips = 0;
};

/// Reusable buffers for hedge_batch_loss; one per thread.
struct HedgeWorkspace {
    MlpBatch net_t;
    MlpBatch net_next;
    AlignedVector m_t, tau_t, m_next, tau_next;
    Eigen::ArrayXd adj_v, adj_1, adj_2, adj_next;
};

/// Mean squared hedging residual over a batch and, if `grad` is non-empty,
/// its gradient w.r.t. the network parameters (overwritten). Clamped Greeks
/// carry zero derivative. `next_params`, if given, prices the next step in
/// place of `params` and receives no gradient.
BatchLoss hedge_batch_loss(const MlpParams& params, std::span<const HedgeSample> batch,
                           HedgeMode mode, HedgeWorkspace& work, std::span<double> grad,
                           NextGradient next = NextGradient::full,
                           const MlpParams* next_params = nullptr);

}  // namespace finn
