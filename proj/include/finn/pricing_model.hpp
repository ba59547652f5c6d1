#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>

#include "finn/market_sim.hpp"
#include "finn/model/mlp.hpp"
#include "finn/pricers/heston.hpp"
#include "finn/pricers/option.hpp"

namespace finn {

/// Anything that prices one option contract at a batch of spots, returning
/// price, delta and gamma. Implementations are the trained network and the
/// analytic oracles; the evaluation harness compares one against another
/// through this interface.
class PricingModel {
public:
    virtual ~PricingModel() = default;

    virtual void evaluate(std::span<const double> spots, const OptionSpec& opt,
                          std::span<PriceGreeks> out) const = 0;

    virtual std::string name() const = 0;

    PriceGreeks at(double spot, const OptionSpec& opt) const {
        PriceGreeks pg;
        evaluate({&spot, 1}, opt, {&pg, 1});
        return pg;
    }
};

class NetworkModel final : public PricingModel {
public:
    explicit NetworkModel(MlpParams params) : params_(std::move(params)) {}

    void evaluate(std::span<const double> spots, const OptionSpec& opt,
                  std::span<PriceGreeks> out) const override;
    std::string name() const override { return "network"; }
    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
};

class BlackScholesModel final : public PricingModel {
public:
    explicit BlackScholesModel(double sigma) : sigma_(sigma) {}

    void evaluate(std::span<const double> spots, const OptionSpec& opt,
                  std::span<PriceGreeks> out) const override;
    std::string name() const override { return "bs"; }
    double sigma() const { return sigma_; }

private:
    double sigma_;
};

/// Characteristic-function prices with bump-and-reprice Greeks. Kernels are
/// cached per (ttm, rate), so an instance is not safe for concurrent use.
class HestonModel final : public PricingModel {
public:
    HestonModel(HestonParams p, QuadratureConfig q = {}, double bump_rel = 1e-3);

    void evaluate(std::span<const double> spots, const OptionSpec& opt,
                  std::span<PriceGreeks> out) const override;
    std::string name() const override { return "heston-cf"; }
    const HestonParams& params() const { return params_; }

private:
    const HestonKernel& kernel(double ttm, double rate) const;

    HestonParams params_;
    QuadratureConfig quad_;
    double bump_rel_;
    mutable std::map<std::pair<double, double>, std::unique_ptr<HestonKernel>> kernels_;
};

}  // namespace finn
