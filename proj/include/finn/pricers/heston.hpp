#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "finn/market_sim.hpp"
#include "finn/pricers/option.hpp"

namespace finn {

/// Truncated fixed-node integration of the Fourier inversion integrals.
struct QuadratureConfig {
    double upper_limit = 200.0;
    std::size_t n_nodes = 256;
    double small_omega_offset = 1e-8;
};

void require_valid(const QuadratureConfig& q);

/// Gauss-Legendre nodes and weights on [a, b].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussLegendre gauss_legendre(std::size_t n, double a, double b);

/// exp(C(tau,u) theta + D(tau,u) v0): the characteristic function of
/// ln S_tau without its forward factor exp(i u ln F). Uses the stable
/// ("little trap") branch and is well behaved as xi -> 0.
std::complex<double> heston_cf_core(std::complex<double> u, const HestonParams& p, double tau);

/// Characteristic function of ln S_tau under the risk-neutral measure.
std::complex<double> heston_cf(std::complex<double> u, double spot, double rate,
                               const HestonParams& p, double tau);

/// Everything in the Pi_1 / Pi_2 integrals that does not depend on spot or
/// strike, precomputed once per (params, ttm, rate, quadrature). Pricing a
/// new (spot, strike) then only costs one complex rotation per node.
class HestonKernel {
public:
    HestonKernel(const HestonParams& p, double ttm, double rate, const QuadratureConfig& q = {});

    double ttm() const { return ttm_; }
    double rate() const { return rate_; }

    struct Probabilities {
        double pi1;
        double pi2;
    };
    /// Throws IntegrationError if either probability leaves [-0.01, 1.01].
    Probabilities probabilities(double spot, double strike) const;
    double price(double spot, double strike, OptionKind kind) const;

private:
    double ttm_;
    double rate_;
    std::vector<double> nodes_;
    std::vector<std::complex<double>> k1_;
    std::vector<std::complex<double>> k2_;
};

double heston_price_cf(double spot, const OptionSpec& opt, const HestonParams& p,
                       const QuadratureConfig& q = {});

/// Central bump-and-reprice Greeks with h = bump_rel * spot.
Greeks heston_greeks_bump(double spot, const OptionSpec& opt, const HestonParams& p,
                          const QuadratureConfig& q = {}, double bump_rel = 1e-3);
Greeks heston_greeks_bump(const HestonKernel& kernel, double spot, double strike,
                          OptionKind kind, double bump_rel = 1e-3);

}  // namespace finn
