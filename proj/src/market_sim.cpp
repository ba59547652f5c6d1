#include "finn/market_sim.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "finn/error.hpp"
#include "finn/random.hpp"

namespace finn {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

void check_sim_options(const SimOptions& o) {
    if (!(o.dt > 0.0) || !std::isfinite(o.dt)) {
        throw DomainError("simulate: dt must be positive and finite");
    }
    if (o.n_paths < 1 || o.n_steps < 1) {
        throw DomainError("simulate: n_paths and n_steps must be >= 1");
    }
    if (o.n_paths > std::numeric_limits<std::uint32_t>::max()) {
        throw DomainError("simulate: too many paths for the counter layout");
    }
    if (o.antithetic && o.n_paths % 2 != 0) {
        throw DomainError("simulate: antithetic sampling needs an even number of paths");
    }
}

// Shocks for (path, step). Antithetic pairs share the counter of the even
// member and negate both normals.
std::array<double, 2> path_normals(const rng::CounterRng& gen, std::size_t path,
                                   std::size_t step, bool antithetic) {
    if (!antithetic) {
        return gen.normals(step, static_cast<std::uint32_t>(path));
    }
    auto z = gen.normals(step, static_cast<std::uint32_t>(path / 2));
    if (path % 2 == 1) {
        z[0] = -z[0];
        z[1] = -z[1];
    }
    return z;
}

}  // namespace

const char* to_string(Scheme s) {
    return s == Scheme::gbm_exact_step ? "gbm_exact_step" : "heston_full_truncation";
}

Validation validate_heston(const HestonParams& p) {
    for (double x : {p.mu, p.kappa, p.theta, p.xi, p.rho, p.v0, p.s0}) {
        if (!std::isfinite(x)) {
            return {false, "non-finite Heston parameter"};
        }
    }
    if (!(p.kappa > 0.0)) return {false, "kappa > 0 violated: kappa = " + fmt(p.kappa)};
    if (!(p.theta > 0.0)) return {false, "theta > 0 violated: theta = " + fmt(p.theta)};
    if (!(p.xi >= 0.0)) return {false, "xi >= 0 violated: xi = " + fmt(p.xi)};
    if (!(p.v0 > 0.0)) return {false, "v0 > 0 violated: v0 = " + fmt(p.v0)};
    if (!(p.s0 > 0.0)) return {false, "s0 > 0 violated: s0 = " + fmt(p.s0)};
    if (!(std::abs(p.rho) <= 1.0)) return {false, "|rho| <= 1 violated: rho = " + fmt(p.rho)};
    const double lhs = 2.0 * p.kappa * p.theta;
    const double rhs = p.xi * p.xi;
    if (!(lhs > rhs)) {
        return {false, "Feller: " + fmt(lhs) + " <= " + fmt(rhs)};
    }
    return {};
}

void require_valid(const HestonParams& p) {
    if (auto v = validate_heston(p); !v) {
        throw FellerError(v.violation);
    }
}

void require_valid(const GbmParams& p) {
    if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !std::isfinite(p.s0)) {
        throw DomainError("gbm: non-finite parameter");
    }
    if (p.sigma < 0.0) throw DomainError("gbm: sigma must be >= 0");
    if (!(p.s0 > 0.0)) throw DomainError("gbm: s0 must be > 0");
}

PathSet::PathSet(std::size_t n_paths, std::size_t n_steps, double dt, std::uint64_t seed,
                 Scheme scheme, double drift, bool antithetic, bool with_variance)
    : n_paths_(n_paths),
      n_steps_(n_steps),
      dt_(dt),
      seed_(seed),
      scheme_(scheme),
      drift_(drift),
      antithetic_(antithetic),
      spots_(n_paths * (n_steps + 1), 0.0) {
    if (with_variance) {
        variances_.assign(n_paths * (n_steps + 1), 0.0);
    }
}

std::vector<double> PathSet::times() const {
    std::vector<double> t(n_steps_ + 1);
    for (std::size_t k = 0; k <= n_steps_; ++k) t[k] = time(k);
    return t;
}

PathSet simulate_gbm(const GbmParams& p, const SimOptions& opt) {
    require_valid(p);
    check_sim_options(opt);
    PathSet out(opt.n_paths, opt.n_steps, opt.dt, opt.seed, Scheme::gbm_exact_step, p.mu,
                opt.antithetic, false);
    const rng::CounterRng gen(opt.seed, rng::Stream::path_shocks);
    const double drift = (p.mu - 0.5 * p.sigma * p.sigma) * opt.dt;
    const double vol = p.sigma * std::sqrt(opt.dt);
    for (std::size_t i = 0; i < opt.n_paths; ++i) {
        double s = p.s0;
        out.spot_ref(i, 0) = s;
        for (std::size_t k = 0; k < opt.n_steps; ++k) {
            const double z = path_normals(gen, i, k, opt.antithetic)[0];
            s *= std::exp(drift + vol * z);
            out.spot_ref(i, k + 1) = s;
        }
    }
    return out;
}

ShockPair heston_shocks(std::uint64_t seed, std::size_t path, std::size_t step, double rho,
                        bool antithetic) {
    const rng::CounterRng gen(seed, rng::Stream::path_shocks);
    const auto z = path_normals(gen, path, step, antithetic);
    // Cholesky factor of [[1, rho], [rho, 1]].
    return {z[0], rho * z[0] + std::sqrt(1.0 - rho * rho) * z[1]};
}

PathSet simulate_heston(const HestonParams& p, const SimOptions& opt) {
    require_valid(p);
    check_sim_options(opt);
    PathSet out(opt.n_paths, opt.n_steps, opt.dt, opt.seed, Scheme::heston_full_truncation,
                p.mu, opt.antithetic, true);
    const double dt = opt.dt;
    const double sqdt = std::sqrt(dt);
    for (std::size_t i = 0; i < opt.n_paths; ++i) {
        double log_s = std::log(p.s0);
        double v = p.v0;
        out.spot_ref(i, 0) = p.s0;
        out.variance_ref(i, 0) = v;
        for (std::size_t k = 0; k < opt.n_steps; ++k) {
            const ShockPair z = heston_shocks(opt.seed, i, k, p.rho, opt.antithetic);
            const double vp = std::max(v, 0.0);
            const double sv = std::sqrt(vp);
            log_s += (p.mu - 0.5 * vp) * dt + sv * sqdt * z.spot;
            v = v + p.kappa * (p.theta - vp) * dt + p.xi * sv * sqdt * z.variance;
            out.spot_ref(i, k + 1) = std::exp(log_s);
            // The scheme carries the raw (possibly negative) state; what is
            // stored is the variance actually used, v+.
            out.variance_ref(i, k + 1) = std::max(v, 0.0);
        }
    }
    return out;
}

void write_paths_csv(const PathSet& paths, std::ostream& out) {
    const bool var = paths.has_variance();
    out << "path_id,step,time,spot" << (var ? ",variance" : "") << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < paths.n_paths(); ++i) {
        for (std::size_t k = 0; k <= paths.n_steps(); ++k) {
            out << i << ',' << k << ',' << paths.time(k) << ',' << paths.spot(i, k);
            if (var) out << ',' << paths.variance(i, k);
            out << '\n';
        }
    }
}

}  // namespace finn
