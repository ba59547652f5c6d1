#include "finn/pricers/heston.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "finn/error.hpp"

namespace finn {

using cplx = std::complex<double>;

namespace {

cplx log1p_c(cplx y) {
    const cplx u = 1.0 + y;
    if (u == cplx(1.0, 0.0)) return y;
    return std::log(u) * y / (u - 1.0);
}

void require_pricer_params(const HestonParams& p) {
    require_valid(p);
    if (!(p.xi > 0.0)) {
        throw DomainError("heston pricer: xi must be > 0 (use Black-Scholes for xi = 0)");
    }
}

}  // namespace

void require_valid(const QuadratureConfig& q) {
    if (!(q.upper_limit > 0.0) || !std::isfinite(q.upper_limit)) {
        throw ConfigError("quadrature: upper_limit must be positive");
    }
    if (q.n_nodes < 32) throw ConfigError("quadrature: n_nodes must be >= 32");
    if (!(q.small_omega_offset > 0.0) || q.small_omega_offset >= q.upper_limit) {
        throw ConfigError("quadrature: small_omega_offset must lie in (0, upper_limit)");
    }
}

GaussLegendre gauss_legendre(std::size_t n, double a, double b) {
    GaussLegendre gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * static_cast<double>(j) - 1.0) * x * p1 -
                      (static_cast<double>(j) - 1.0) * p2) /
                     static_cast<double>(j);
            }
            dp = static_cast<double>(n) * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        gl.nodes[i] = mid - half * x;
        gl.nodes[n - 1 - i] = mid + half * x;
        gl.weights[i] = half * w;
        gl.weights[n - 1 - i] = half * w;
    }
    return gl;
}

cplx heston_cf_core(cplx u, const HestonParams& p, double tau) {
    const cplx iu(0.0, 1.0);
    const cplx b = p.kappa - p.rho * p.xi * iu * u;
    const cplx q = iu * u + u * u;  // i u + u^2
    const cplx d = std::sqrt(b * b + p.xi * p.xi * q);
    // b - d rewritten as -xi^2 q / (b + d): no cancellation as xi -> 0.
    const cplx b_minus_d = -q / (b + d);  // already divided by xi^2
    const cplx g = p.xi * p.xi * b_minus_d / (b + d);
    const cplx e = std::exp(-d * tau);
    const cplx one_minus_ge = 1.0 - g * e;
    const cplx y = g * (1.0 - e) / (1.0 - g);
    // log((1 - g e) / (1 - g)) / xi^2 with y = O(xi^2).
    const cplx log_term = log1p_c(y) / (p.xi * p.xi);
    const cplx c_theta = p.kappa * p.theta * (b_minus_d * tau - 2.0 * log_term);
    const cplx d_v0 = p.v0 * b_minus_d * (1.0 - e) / one_minus_ge;
    return std::exp(c_theta + d_v0);
}

cplx heston_cf(cplx u, double spot, double rate, const HestonParams& p, double tau) {
    const cplx iu(0.0, 1.0);
    return heston_cf_core(u, p, tau) * std::exp(iu * u * (std::log(spot) + rate * tau));
}

HestonKernel::HestonKernel(const HestonParams& p, double ttm, double rate,
                           const QuadratureConfig& q)
    : ttm_(ttm), rate_(rate) {
    require_pricer_params(p);
    require_valid(q);
    if (!(ttm > 0.0)) throw DomainError("heston pricer: ttm must be > 0");
    const auto gl = gauss_legendre(q.n_nodes, q.small_omega_offset, q.upper_limit);
    nodes_ = gl.nodes;
    k1_.resize(q.n_nodes);
    k2_.resize(q.n_nodes);
    const cplx iu(0.0, 1.0);
    for (std::size_t j = 0; j < q.n_nodes; ++j) {
        const double w = gl.nodes[j];
        const cplx denom = iu * w;
        // Psi(w - i) / Psi(-i) = core(w - i) * exp(i w ln F), Psi(-i) = F.
        k1_[j] = gl.weights[j] * heston_cf_core(cplx(w, -1.0), p, ttm) / denom;
        k2_[j] = gl.weights[j] * heston_cf_core(cplx(w, 0.0), p, ttm) / denom;
    }
}

HestonKernel::Probabilities HestonKernel::probabilities(double spot, double strike) const {
    if (!(spot > 0.0) || !(strike > 0.0)) {
        throw DomainError("heston pricer: spot and strike must be > 0");
    }
    const double x = std::log(spot / strike) + rate_ * ttm_;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        const double a = nodes_[j] * x;
        const double c = std::cos(a);
        const double s = std::sin(a);
        s1 += k1_[j].real() * c - k1_[j].imag() * s;
        s2 += k2_[j].real() * c - k2_[j].imag() * s;
    }
    const Probabilities pr{0.5 + s1 / std::numbers::pi, 0.5 + s2 / std::numbers::pi};
    if (!(pr.pi1 >= -0.01 && pr.pi1 <= 1.01 && pr.pi2 >= -0.01 && pr.pi2 <= 1.01)) {
        throw IntegrationError("heston pricer: probabilities out of range (pi1=" +
                               std::to_string(pr.pi1) + ", pi2=" + std::to_string(pr.pi2) +
                               "); check the quadrature configuration");
    }
    return pr;
}

double HestonKernel::price(double spot, double strike, OptionKind kind) const {
    const auto pr = probabilities(spot, strike);
    const double df = std::exp(-rate_ * ttm_);
    const double call = spot * pr.pi1 - strike * df * pr.pi2;
    return kind == OptionKind::call ? call : call - spot + strike * df;
}

double heston_price_cf(double spot, const OptionSpec& opt, const HestonParams& p,
                       const QuadratureConfig& q) {
    require_valid(opt);
    if (opt.ttm == 0.0) return payoff(opt.kind, spot, opt.strike);
    return HestonKernel(p, opt.ttm, opt.rate, q).price(spot, opt.strike, opt.kind);
}

Greeks heston_greeks_bump(const HestonKernel& kernel, double spot, double strike,
                          OptionKind kind, double bump_rel) {
    if (!(bump_rel >= 1e-5 && bump_rel <= 1e-2)) {
        throw DomainError("heston greeks: bump_rel must lie in [1e-5, 1e-2]");
    }
    const double h = bump_rel * spot;
    const double up = kernel.price(spot + h, strike, kind);
    const double mid = kernel.price(spot, strike, kind);
    const double dn = kernel.price(spot - h, strike, kind);
    return {(up - dn) / (2.0 * h), (up - 2.0 * mid + dn) / (h * h)};
}

Greeks heston_greeks_bump(double spot, const OptionSpec& opt, const HestonParams& p,
                          const QuadratureConfig& q, double bump_rel) {
    require_valid(opt);
    if (opt.ttm == 0.0) throw DomainError("heston greeks: undefined at expiry");
    return heston_greeks_bump(HestonKernel(p, opt.ttm, opt.rate, q), spot, opt.strike, opt.kind,
                              bump_rel);
}

}  // namespace finn
