#include "finn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "finn/error.hpp"
#include "finn/random.hpp"

namespace finn {

namespace {

constexpr std::size_t kEvalChunk = 4096;

std::size_t ttm_steps(double ttm, double dt) {
    return static_cast<std::size_t>(std::llround(ttm / dt));
}

struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    explicit Adam(double lr_) : lr(lr_), m(MlpParams::kCount, 0.0), v(MlpParams::kCount, 0.0) {}

    void step(std::span<double> theta, std::span<const double> g) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

double mean_loss(const MlpParams& params, const std::vector<HedgeSample>& samples,
                 HedgeMode mode, HedgeWorkspace& work) {
    double sum = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, samples.size() - start);
        const BatchLoss b =
            hedge_batch_loss(params, {samples.data() + start, n}, mode, work, {});
        sum += b.loss * static_cast<double>(n);
    }
    return sum / static_cast<double>(samples.size());
}

void shuffle(std::vector<std::size_t>& order, std::uint64_t seed, int epoch) {
    const rng::CounterRng gen(seed, rng::Stream::shuffle);
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto b = gen.bits(static_cast<std::uint64_t>(epoch), static_cast<std::uint32_t>(i));
        const std::uint64_t x = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
        std::swap(order[i - 1], order[x % i]);
    }
}

}  // namespace

const char* to_string(ProcessKind p) { return p == ProcessKind::gbm ? "gbm" : "heston"; }

void validate(const TrainConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
    if (cfg.process == ProcessKind::gbm) {
        try {
            require_valid(cfg.gbm);
        } catch (const DomainError& e) {
            fail(e.what());
        }
    } else {
        require_valid(cfg.heston);
        require_valid(cfg.quad);
    }
    if (cfg.epochs < 1) fail("epochs must be >= 1");
    if (cfg.batch_size == 0) fail("batch_size must be > 0");
    if (!(cfg.learning_rate > 0.0)) fail("learning rate must be > 0");
    if (!(cfg.lr_final_ratio > 0.0) || cfg.lr_final_ratio > 1.0) {
        fail("lr_final_ratio must be in (0, 1]");
    }
    if (cfg.patience < 1) fail("patience must be >= 1");
    if (cfg.target_sync < 0) fail("target_sync must be >= 0");
    if (!(cfg.dt > 0.0)) fail("dt must be > 0");
    if (!(cfg.strike_range[0] > 0.0) || !(cfg.strike_range[1] > cfg.strike_range[0])) {
        fail("strike range must satisfy 0 < low < high");
    }
    if (!(cfg.ttm_range[0] > 0.0) || !(cfg.ttm_range[1] > cfg.ttm_range[0])) {
        fail("ttm range must satisfy 0 < low < high");
    }
    if (cfg.ttm_range[0] < cfg.dt * (1.0 - 1e-9)) fail("ttm low is shorter than one step");
    if (cfg.n_train_paths == 0 || cfg.n_val_paths == 0) fail("need training and validation paths");
    if (cfg.n_steps != 0 && static_cast<double>(cfg.n_steps) * cfg.dt <
                                cfg.ttm_range[1] - 1e-9 * cfg.dt) {
        fail("paths are shorter than the longest maturity");
    }
    if (cfg.hedge_mode == HedgeMode::delta_gamma && !(cfg.atm_ttm > cfg.dt)) {
        fail("hedging option must outlive one step");
    }
    if (cfg.hedge_mode == HedgeMode::delta_gamma && cfg.process == ProcessKind::heston &&
        !(cfg.heston.xi > 0.0)) {
        fail("Heston hedging-option quotes need xi > 0");
    }
}

std::size_t simulation_steps(const TrainConfig& cfg) {
    return cfg.n_steps != 0 ? cfg.n_steps : ttm_steps(cfg.ttm_range[1], cfg.dt);
}

PathSet simulate_training_paths(const TrainConfig& cfg) {
    SimOptions o;
    o.n_paths = cfg.n_train_paths + cfg.n_val_paths;
    o.n_steps = simulation_steps(cfg);
    o.dt = cfg.dt;
    o.seed = cfg.seed;
    return cfg.process == ProcessKind::gbm ? simulate_gbm(cfg.gbm, o)
                                           : simulate_heston(cfg.heston, o);
}

SampleSet build_samples(const PathSet& paths, const TrainConfig& cfg) {
    if (paths.n_paths() != cfg.n_train_paths + cfg.n_val_paths) {
        throw ConfigError("path count does not match the configuration");
    }
    const std::size_t k_lo = std::max<std::size_t>(1, ttm_steps(cfg.ttm_range[0], cfg.dt));
    const std::size_t k_hi = ttm_steps(cfg.ttm_range[1], cfg.dt);
    if (static_cast<double>(k_hi) * paths.dt() > paths.horizon() + 1e-12) {
        throw ConfigError("paths are shorter than the longest maturity");
    }
    std::optional<AtmQuoter> quoter;
    if (cfg.hedge_mode == HedgeMode::delta_gamma) {
        quoter = cfg.process == ProcessKind::gbm
                     ? AtmQuoter::black_scholes(cfg.gbm.sigma, cfg.rate, cfg.atm_ttm, cfg.dt)
                     : AtmQuoter::heston(cfg.heston, cfg.rate, cfg.atm_ttm, cfg.dt, cfg.quad);
    }
    const rng::CounterRng aug(cfg.seed, rng::Stream::augmentation);
    const double k_span = cfg.strike_range[1] - cfg.strike_range[0];
    const auto n_k = static_cast<double>(k_hi - k_lo + 1);

    SampleSet set;
    set.train.reserve(cfg.n_train_paths * paths.n_steps());
    set.validation.reserve(cfg.n_val_paths * paths.n_steps());
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        auto& dest = p < cfg.n_train_paths ? set.train : set.validation;
        for (std::size_t t = 0; t < paths.n_steps(); ++t) {
            const auto u = aug.uniforms(t, static_cast<std::uint32_t>(p));
            const auto k = std::min(k_hi, k_lo + static_cast<std::size_t>(u[1] * n_k));
            HedgeSample s;
            s.s_t = paths.spot(p, t);
            s.s_next = paths.spot(p, t + 1);
            s.ttm_t = static_cast<double>(k) * cfg.dt;
            s.dt = cfg.dt;
            s.rate = cfg.rate;
            s.strike = cfg.strike_range[0] + k_span * u[0];
            s.kind = cfg.kind;
            if (quoter) {
                s.atm = quoter->quote(s.s_t, s.s_next);
                if (!(s.atm->gamma > kGammaFloor)) {
                    ++set.rejected;
                    continue;
                }
            }
            dest.push_back(s);
        }
    }
    return set;
}

std::vector<std::vector<HedgeSample>> build_batches(const PathSet& paths, const TrainConfig& cfg) {
    const SampleSet set = build_samples(paths, cfg);
    std::vector<std::vector<HedgeSample>> out;
    for (std::size_t start = 0; start < set.train.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(set.train.size(), start + cfg.batch_size);
        out.emplace_back(set.train.begin() + static_cast<std::ptrdiff_t>(start),
                         set.train.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
    using clock = std::chrono::steady_clock;
    validate(cfg);
    const PathSet paths = simulate_training_paths(cfg);
    const SampleSet data = build_samples(paths, cfg);
    if (data.train.empty() || data.validation.empty()) {
        throw ConfigError("no usable training samples");
    }

    MlpParams params = init_params(cfg.seed);
    params.meta.seed = cfg.seed;
    params.meta.process = to_string(cfg.process);
    params.meta.loss = to_string(cfg.hedge_mode);
    params.meta.kind = cfg.kind;

    TrainResult result;
    result.rejected_samples = data.rejected;
    HedgeWorkspace work;

    EpochRecord first;
    const auto t0 = clock::now();
    first.train_loss = mean_loss(params, data.train, cfg.hedge_mode, work);
    first.val_loss = mean_loss(params, data.validation, cfg.hedge_mode, work);
    first.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (!std::isfinite(first.train_loss) || !std::isfinite(first.val_loss)) {
        throw TrainingAborted("non-finite loss at initialisation", 0, -1);
    }
    result.history.push_back(first);
    if (on_epoch) on_epoch(first);

    MlpParams best = params;
    double best_val = first.val_loss;
    Adam adam(cfg.learning_rate);
    AlignedVector grad(MlpParams::kCount);
    const bool use_target = cfg.next_gradient == NextGradient::detached && cfg.target_sync > 0;
    MlpParams target = params;
    long steps = 0;
    std::vector<std::size_t> order(data.train.size());
    std::vector<HedgeSample> batch;
    batch.reserve(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = clock::now();
        const double progress =
            cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 0.0;
        adam.lr = cfg.learning_rate * std::pow(cfg.lr_final_ratio, progress);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order, cfg.seed, epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        double sum = 0.0;
        long batch_index = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size, ++batch_index) {
            const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
            batch.clear();
            for (std::size_t i = lo; i < hi; ++i) batch.push_back(data.train[order[i]]);
            const BatchLoss b =
                hedge_batch_loss(params, batch, cfg.hedge_mode, work, grad, cfg.next_gradient, use_target ? &target : nullptr);
            if (!std::isfinite(b.loss)) {
                throw TrainingAborted("non-finite training loss", epoch, batch_index);
            }
            double norm2 = 0.0;
            for (double g : grad) norm2 += g * g;
            const double norm = std::sqrt(norm2);
            if (!std::isfinite(norm) || norm > cfg.grad_abort) {
                std::ostringstream msg;
                msg << "gradient norm " << norm << " exceeds " << cfg.grad_abort;
                throw TrainingAborted(msg.str(), epoch, batch_index);
            }
            if (norm > cfg.grad_clip) {
                const double scale = cfg.grad_clip / norm;
                for (double& g : grad) g *= scale;
            }
            adam.step(params.values(), grad);
            if (use_target && ++steps % cfg.target_sync == 0) target = params;
            sum += b.loss * static_cast<double>(hi - lo);
            rec.delta_clips += b.delta_clips;
            rec.gamma_clips += b.gamma_clips;
        }
        rec.train_loss = sum / static_cast<double>(order.size());
        rec.val_loss = mean_loss(params, data.validation, cfg.hedge_mode, work);
        if (!std::isfinite(rec.val_loss)) {
            throw TrainingAborted("non-finite validation loss", epoch, -1);
        }
        rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = params;
            result.best_epoch = epoch;
        } else if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }
    best.meta.epoch = static_cast<std::uint32_t>(result.best_epoch);
    result.params = std::move(best);
    return result;
}

std::vector<RunOutcome> multi_run(
    const TrainConfig& cfg, int n_runs,
    const std::function<void(std::uint64_t, const EpochRecord&)>& on_epoch) {
    if (n_runs < 1) throw ConfigError("runs must be >= 1");
    std::vector<RunOutcome> out;
    for (int i = 0; i < n_runs; ++i) {
        TrainConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(i);
        RunOutcome r;
        r.seed = c.seed;
        try {
            EpochCallback cb;
            if (on_epoch) cb = [&](const EpochRecord& e) { on_epoch(c.seed, e); };
            r.result = train(c, cb);
        } catch (const TrainingAborted& e) {
            r.aborted = true;
            r.error = std::string(e.what()) + " (epoch " + std::to_string(e.epoch()) +
                      ", batch " + std::to_string(e.batch()) + ")";
        } catch (const Error& e) {
            r.error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
    out << "epoch,train_loss,val_loss,delta_clips,gamma_clips,seconds\n";
    const auto old = out.precision(10);
    for (const auto& e : history) {
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.delta_clips << ','
            << e.gamma_clips << ',' << e.seconds << '\n';
    }
    out.precision(old);
}

}  // namespace finn
