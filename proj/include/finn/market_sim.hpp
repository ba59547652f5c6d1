#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace finn {

/// Geometric Brownian motion dS = mu S dt + sigma S dW.
struct GbmParams {
    double mu = 0.06;
    double sigma = 0.125;
    double s0 = 100.0;
};

/// Heston: dS = mu S dt + sqrt(v) S dW_S, dv = kappa (theta - v) dt + xi sqrt(v) dW_v,
/// corr(dW_S, dW_v) = rho. Defaults are the reference experiment parameters.
struct HestonParams {
    double mu = 0.0;
    double kappa = 1.25;
    double theta = 0.0225;
    double xi = 0.15;
    double rho = -0.7;
    double v0 = 0.0225;
    double s0 = 100.0;
};

struct Validation {
    bool ok = true;
    std::string violation;

    explicit operator bool() const { return ok; }
};

/// Checks the Heston invariants: Feller 2 kappa theta > xi^2, |rho| <= 1,
/// positivity of kappa, theta, xi, v0 and s0. The violation message names
/// the failing inequality with both sides evaluated.
Validation validate_heston(const HestonParams& p);
/// Throws FellerError when validate_heston fails.
void require_valid(const HestonParams& p);
void require_valid(const GbmParams& p);

enum class Scheme { gbm_exact_step, heston_full_truncation };

const char* to_string(Scheme s);

/// Simulated trajectories on a uniform grid. Row-major: spot(path, step).
class PathSet {
public:
    PathSet(std::size_t n_paths, std::size_t n_steps, double dt, std::uint64_t seed,
            Scheme scheme, double drift, bool antithetic, bool with_variance);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double time(std::size_t step) const { return static_cast<double>(step) * dt_; }
    double horizon() const { return time(n_steps_); }
    std::uint64_t seed() const { return seed_; }
    Scheme scheme() const { return scheme_; }
    /// Drift the paths were simulated with; mc_price compares it to the rate.
    double drift() const { return drift_; }
    /// Paths (2k, 2k+1) use negated shocks of each other.
    bool antithetic() const { return antithetic_; }
    bool has_variance() const { return !variances_.empty(); }

    double spot(std::size_t path, std::size_t step) const {
        return spots_[path * (n_steps_ + 1) + step];
    }
    double variance(std::size_t path, std::size_t step) const {
        return variances_[path * (n_steps_ + 1) + step];
    }
    double& spot_ref(std::size_t path, std::size_t step) {
        return spots_[path * (n_steps_ + 1) + step];
    }
    double& variance_ref(std::size_t path, std::size_t step) {
        return variances_[path * (n_steps_ + 1) + step];
    }

    std::vector<double> times() const;

private:
    std::size_t n_paths_;
    std::size_t n_steps_;
    double dt_;
    std::uint64_t seed_;
    Scheme scheme_;
    double drift_;
    bool antithetic_;
    std::vector<double> spots_;
    std::vector<double> variances_;
};

struct SimOptions {
    std::size_t n_paths = 1;
    std::size_t n_steps = 1;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 0;
    bool antithetic = false;
};

/// Exact log-normal stepping S <- S exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z).
PathSet simulate_gbm(const GbmParams& p, const SimOptions& opt);

/// Full-truncation Euler for the variance (v+ in drift and diffusion) and a
/// log-Euler step for the spot driven by sqrt(v+).
PathSet simulate_heston(const HestonParams& p, const SimOptions& opt);

/// The two correlated shocks (spot, variance) used for a given path and
/// step; exposed so that the correlation structure can be tested directly.
struct ShockPair {
    double spot;
    double variance;
};
ShockPair heston_shocks(std::uint64_t seed, std::size_t path, std::size_t step, double rho,
                        bool antithetic);

/// CSV with header `path_id,step,time,spot[,variance]`.
void write_paths_csv(const PathSet& paths, std::ostream& out);

}  // namespace finn
