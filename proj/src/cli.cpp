#include "finn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "finn/error.hpp"
#include "finn/eval_harness.hpp"
#include "finn/market_sim.hpp"
#include "finn/model/checkpoint.hpp"
#include "finn/pricers/black_scholes.hpp"
#include "finn/pricers/heston.hpp"
#include "finn/pricers/monte_carlo.hpp"
#include "finn/trainer.hpp"

namespace finn::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string paper(const std::string& text) { return text + " [paper]"; }
std::string artifact(const std::string& text) { return text + " [artifact]"; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError(std::string("bad number in --") + what + ": '" + item + "'");
        }
    }
    return v;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

std::string join_args(const std::vector<std::string>& args) {
    std::string s = "finn";
    for (const auto& a : args) s += " " + a;
    return s;
}

void write_file_kv(const fs::path& path, const KeyValues& kv) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    write_key_values(kv, f);
    if (!f) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------- options

struct ProcessOpts {
    std::string process = "gbm";
    std::optional<double> mu;
    double sigma = 0.125;
    double s0 = 100.0;
    double kappa = 1.25;
    double theta = 0.0225;
    double xi = 0.15;
    double rho = -0.7;
    double v0 = 0.0225;

    ProcessKind kind() const { return process == "gbm" ? ProcessKind::gbm : ProcessKind::heston; }
    GbmParams gbm() const { return {mu.value_or(0.06), sigma, s0}; }
    HestonParams heston() const { return {mu.value_or(0.0), kappa, theta, xi, rho, v0, s0}; }
};

// `process_flag` is "--process" or "--model,--process".
void add_process_options(CLI::App* app, ProcessOpts& o, const std::string& process_flag,
                         bool with_mu) {
    app->add_option(process_flag, o.process, artifact("price process"))
        ->check(CLI::IsMember({"gbm", "heston"}));
    if (with_mu) {
        app->add_option("--mu", o.mu,
                        artifact("drift of the simulated paths (default 0.06 gbm, 0 heston)"));
    }
    app->add_option("--sigma", o.sigma, paper("GBM volatility"));
    app->add_option("--s0", o.s0, paper("initial spot"));
    app->add_option("--kappa", o.kappa, paper("Heston mean-reversion speed"));
    app->add_option("--theta", o.theta, paper("Heston long-run variance"));
    app->add_option("--xi", o.xi, paper("Heston vol-of-vol"));
    app->add_option("--rho", o.rho, paper("Heston spot/variance correlation"));
    app->add_option("--v0", o.v0, paper("Heston initial variance"));
}

struct GridOpts {
    std::size_t spots = 10000;
    double spot_low = 75.0;
    double spot_high = 125.0;
    double strike_low = 90.0;
    double strike_high = 110.0;
    double strike_step = 1.0;
    std::string ttms = "0.24,0.28,0.32,0.36,0.40,0.44,0.48";
    std::string vols;
    std::string kind = "call";
    double rate = 0.0;
    bool dry_run = false;
    std::size_t runs = 1;
    std::string out;
};

void add_grid_options(CLI::App* app, GridOpts& o) {
    app->add_option("--spots", o.spots, paper("spot samples per contract"));
    app->add_option("--spot-low", o.spot_low, paper("lowest spot"));
    app->add_option("--spot-high", o.spot_high, paper("highest spot"));
    app->add_option("--strike-low", o.strike_low, paper("lowest strike"));
    app->add_option("--strike-high", o.strike_high, paper("highest strike"));
    app->add_option("--strike-step", o.strike_step, paper("strike increment"));
    app->add_option("--ttms", o.ttms, paper("comma-separated maturities"));
    app->add_option("--vols", o.vols,
                    paper("comma-separated vols (gbm) or vol-of-vols (heston); "
                          "default: the model's own"));
    app->add_option("--kind", o.kind, artifact("option kind"))
        ->check(CLI::IsMember({"call", "put"}));
    app->add_option("--rate", o.rate, paper("risk-free rate"));
    app->add_flag("--dry-run", o.dry_run, artifact("list the sweep without pricing"));
    app->add_option("--runs", o.runs, paper("runs assumed by --dry-run"));
    app->add_option("--out", o.out, artifact("output CSV (default stdout)"));
}

EvalGrid build_grid(const GridOpts& o, std::vector<double> vols, OptionKind kind) {
    if (!(o.strike_step > 0.0)) throw ConfigError("--strike-step must be > 0");
    EvalGrid g;
    g.spots = linspace(o.spot_low, o.spot_high, o.spots);
    for (double k = o.strike_low; k <= o.strike_high + 1e-9 * o.strike_step; k += o.strike_step) {
        g.strikes.push_back(k);
    }
    g.ttms = parse_list(o.ttms, "ttms");
    g.vols = std::move(vols);
    g.kind = kind;
    validate(g);
    return g;
}

OptionKind parse_kind(const std::string& s) {
    return s == "put" ? OptionKind::put : OptionKind::call;
}

// Writes to --out, or to `out` when no file was given.
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
    if (path.empty()) {
        fn(out);
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    fn(f);
}

void print_plan(const SweepPlan& p, std::ostream& out) {
    out << "runs=" << p.runs << " cells=" << p.cells << " contracts=" << p.contracts
        << " points_per_run=" << p.points_per_run << " total_points=" << p.total_points << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
    ProcessOpts process;
    std::size_t paths = 1000;
    std::size_t steps = 120;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    std::string out;
    std::string manifest;

    void add(CLI::App* app) {
        add_process_options(app, process, "--model,--process", true);
        app->add_option("--paths", paths, artifact("number of paths"));
        app->add_option("--steps", steps, artifact("steps per path"));
        app->add_option("--dt", dt, paper("step length in years (one trading day)"));
        app->add_option("--seed", seed, artifact("random seed"));
        app->add_flag("--antithetic", antithetic, artifact("pair each path with its mirror"));
        app->add_option("--out", out, artifact("paths CSV (default stdout)"));
        app->add_option("--manifest", manifest, artifact("manifest path (default <out>.manifest)"));
    }

    int run(const std::vector<std::string>& args, std::ostream& out_s, std::ostream& err) {
        if (process.kind() == ProcessKind::heston) {
            const Validation v = validate_heston(process.heston());
            if (!v) {
                err << "error: " << v.violation << '\n';
                return kFeller;
            }
        }
        std::string manifest_path = manifest;
        if (manifest_path.empty() && !out.empty()) manifest_path = out + ".manifest";
        if (!manifest_path.empty()) {
            write_file_kv(manifest_path, {{"command", join_args(args)},
                                          {"version", kVersion},
                                          {"started", utc_now()},
                                          {"seeds", std::to_string(seed)},
                                          {"artifacts", out}});
        }
        SimOptions o;
        o.n_paths = paths;
        o.n_steps = steps;
        o.dt = dt;
        o.seed = seed;
        o.antithetic = antithetic;
        const PathSet p = process.kind() == ProcessKind::gbm ? simulate_gbm(process.gbm(), o)
                                                               : simulate_heston(process.heston(), o);
        emit(out, out_s, [&](std::ostream& s) { write_paths_csv(p, s); });
        return kOk;
    }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
    ProcessOpts process;
    std::string hedge = "delta";
    double atm_ttm = 30.0 / 250.0;
    std::string next_gradient = "detached";
    int target_sync = 50;
    std::string kind = "call";
    int epochs = 250;
    std::size_t batch_size = 256;
    double lr = 1e-3;
    double lr_final_ratio = 0.01;
    int patience = 50;
    double grad_clip = 10.0;
    double strike_low = 90.0;
    double strike_high = 110.0;
    double ttm_low = 1.0 / 250.0;
    double ttm_high = 0.48;
    std::size_t train_paths = 1800;
    std::size_t val_paths = 200;
    std::size_t steps = 0;
    double dt = 1.0 / 250.0;
    double rate = 0.0;
    std::uint64_t seed = 0;
    int runs = 1;
    std::string out_dir = "runs";
    std::string tag;
    bool overwrite = false;
    bool quiet = false;

    void add(CLI::App* app) {
        add_process_options(app, process, "--process", true);
        app->add_option("--hedge", hedge, paper("hedging loss"))
            ->check(CLI::IsMember({"delta", "delta-gamma"}));
        app->add_option("--atm-ttm", atm_ttm, paper("life of the ATM hedging option (30 days)"));
        app->add_option("--next-gradient", next_gradient,
                        artifact("gradient through the next-step price: full or detached"))
            ->check(CLI::IsMember({"full", "detached"}));
        app->add_option("--target-sync", target_sync,
                        artifact("batches between target-network refreshes (detached; 0: none)"))
            ->check(CLI::NonNegativeNumber);
        app->add_option("--kind", kind, artifact("option kind"))
            ->check(CLI::IsMember({"call", "put"}));
        app->add_option("--epochs", epochs, paper("maximum epochs"));
        app->add_option("--batch-size", batch_size, artifact("samples per batch"));
        app->add_option("--lr", lr, artifact("Adam learning rate"));
        app->add_option("--lr-final-ratio", lr_final_ratio,
                        artifact("final learning rate as a fraction of --lr"));
        app->add_option("--patience", patience, artifact("early-stopping patience in epochs"));
        app->add_option("--grad-clip", grad_clip, artifact("global gradient-norm clip"));
        app->add_option("--strike-low", strike_low, paper("lowest sampled strike"));
        app->add_option("--strike-high", strike_high, paper("highest sampled strike"));
        app->add_option("--ttm-low", ttm_low, artifact("shortest sampled maturity"));
        app->add_option("--ttm-high", ttm_high, paper("longest sampled maturity"));
        app->add_option("--train-paths", train_paths, artifact("training paths"));
        app->add_option("--val-paths", val_paths, artifact("validation paths"));
        app->add_option("--steps", steps, artifact("steps per path (0: longest maturity)"));
        app->add_option("--dt", dt, paper("step length in years"));
        app->add_option("--rate", rate, paper("risk-free rate"));
        app->add_option("--seed", seed, artifact("seed of the first run"));
        app->add_option("--runs", runs, paper("independent runs (seeds seed, seed+1, ...)"));
        app->add_option("--out-dir", out_dir, artifact("root of run directories"));
        app->add_option("--tag", tag, artifact("run directory name (default <process>-<hedge>)"));
        app->add_flag("--overwrite", overwrite, artifact("replace an existing run directory"));
        app->add_flag("--quiet", quiet, artifact("no per-epoch progress on stderr"));
    }

    TrainConfig config() const {
        TrainConfig c;
        c.process = process.kind();
        c.gbm = process.gbm();
        c.heston = process.heston();
        c.hedge_mode = hedge == "delta" ? HedgeMode::delta : HedgeMode::delta_gamma;
        c.atm_ttm = atm_ttm;
        c.next_gradient = next_gradient == "full" ? NextGradient::full : NextGradient::detached;
        c.target_sync = target_sync;
        c.kind = parse_kind(kind);
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.learning_rate = lr;
        c.lr_final_ratio = lr_final_ratio;
        c.patience = patience;
        c.grad_clip = grad_clip;
        c.strike_range = {strike_low, strike_high};
        c.ttm_range = {ttm_low, ttm_high};
        c.n_train_paths = train_paths;
        c.n_val_paths = val_paths;
        c.n_steps = steps;
        c.dt = dt;
        c.rate = rate;
        c.seed = seed;
        return c;
    }

    KeyValues snapshot(std::uint64_t run_seed) const {
        const TrainConfig c = config();
        return {{"process", process.process},
                {"mu", fmt(process.kind() == ProcessKind::gbm ? c.gbm.mu : c.heston.mu)},
                {"sigma", fmt(process.sigma)},
                {"s0", fmt(process.s0)},
                {"kappa", fmt(process.kappa)},
                {"theta", fmt(process.theta)},
                {"xi", fmt(process.xi)},
                {"rho", fmt(process.rho)},
                {"v0", fmt(process.v0)},
                {"hedge", hedge},
                {"atm-ttm", fmt(atm_ttm)},
                {"next-gradient", next_gradient},
                {"target-sync", std::to_string(target_sync)},
                {"kind", kind},
                {"epochs", std::to_string(epochs)},
                {"batch-size", std::to_string(batch_size)},
                {"lr", fmt(lr)},
                {"lr-final-ratio", fmt(lr_final_ratio)},
                {"patience", std::to_string(patience)},
                {"grad-clip", fmt(grad_clip)},
                {"strike-low", fmt(strike_low)},
                {"strike-high", fmt(strike_high)},
                {"ttm-low", fmt(ttm_low)},
                {"ttm-high", fmt(ttm_high)},
                {"train-paths", std::to_string(train_paths)},
                {"val-paths", std::to_string(val_paths)},
                {"steps", std::to_string(steps)},
                {"dt", fmt(dt)},
                {"rate", fmt(rate)},
                {"seed", std::to_string(run_seed)}};
    }

    int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
        if (runs < 1) throw ConfigError("--runs must be >= 1");
        const TrainConfig base = config();
        validate(base);
        const std::string name =
            tag.empty() ? std::string(to_string(base.process)) + "-" + hedge : tag;
        const fs::path root = fs::path(out_dir) / name;
        if (fs::exists(root / "manifest.txt") && !overwrite) {
            throw ConfigError("run directory " + root.string() +
                              " already exists (use --overwrite)");
        }
        fs::create_directories(root);

        KeyValues manifest{{"command", join_args(args)},
                           {"version", kVersion},
                           {"started", utc_now()}};
        std::string seeds;
        std::string artifacts;
        for (int i = 0; i < runs; ++i) {
            const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
            seeds += (i ? "," : "") + std::to_string(s);
            const fs::path d = root / ("seed" + std::to_string(s));
            artifacts += (i ? "," : "") + (d / "model.ckpt").string() + "," +
                         (d / "history.csv").string() + "," + (d / "config.snapshot").string();
        }
        manifest.emplace_back("seeds", seeds);
        manifest.emplace_back("artifacts", artifacts);
        for (const auto& [k, v] : snapshot(seed)) manifest.emplace_back("config." + k, v);
        write_file_kv(root / "manifest.txt", manifest);

        int status = kOk;
        for (int i = 0; i < runs; ++i) {
            TrainConfig cfg = base;
            cfg.seed = seed + static_cast<std::uint64_t>(i);
            const fs::path dir = root / ("seed" + std::to_string(cfg.seed));
            fs::create_directories(dir);
            write_file_kv(dir / "config.snapshot", snapshot(cfg.seed));
            EpochCallback progress;
            if (!quiet) {
                progress = [&err, &cfg](const EpochRecord& e) {
                    err << "seed " << cfg.seed << " epoch " << e.epoch
                        << " train_loss=" << e.train_loss << " val_loss=" << e.val_loss
                        << " (" << std::fixed << std::setprecision(2) << e.seconds << "s)"
                        << std::defaultfloat << std::setprecision(6) << '\n';
                };
            }
            try {
                const TrainResult r = train(cfg, progress);
                save_checkpoint(r.params, dir / "model.ckpt");
                std::ofstream h(dir / "history.csv");
                if (!h) throw Error("cannot write " + (dir / "history.csv").string());
                write_history_csv(r.history, h);
                if (r.rejected_samples != 0) {
                    err << "seed " << cfg.seed << ": " << r.rejected_samples
                        << " samples rejected (hedging-option gamma at floor)\n";
                }
                out << "seed=" << cfg.seed << " best_epoch=" << r.best_epoch
                    << " val_loss=" << r.history[static_cast<std::size_t>(r.best_epoch)].val_loss
                    << " checkpoint=" << (dir / "model.ckpt").string() << '\n';
            } catch (const TrainingAborted& e) {
                err << "error: seed " << cfg.seed << ": training aborted at epoch " << e.epoch()
                    << ", batch " << e.batch() << ": " << e.what() << '\n';
                status = kAborted;
            }
        }
        return status;
    }
};

// ---------------------------------------------------------------- evaluate

MlpParams load_model(const std::string& path) {
    if (path.empty()) throw ConfigError("no checkpoint given (--model)");
    if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
    try {
        return load_checkpoint(path);
    } catch (const FormatError& e) {
        throw ConfigError(std::string("unreadable checkpoint: ") + e.what());
    }
}

OracleSpec oracle_spec(const ProcessOpts& p, double rate) {
    OracleSpec o;
    o.kind = p.kind() == ProcessKind::gbm ? OracleKind::black_scholes : OracleKind::heston_cf;
    o.rate = rate;
    o.heston = p.heston();
    return o;
}

struct EvaluateCmd {
    ProcessOpts process;
    GridOpts grid;
    std::string model;
    double bump_rel = 1e-3;
    bool gamma = false;
    std::string curves;
    double curve_ttm = 0.36;
    double curve_strike = 100.0;
    std::optional<double> curve_vol;
    std::size_t curve_points = 501;
    CLI::Option* process_opt = nullptr;
    CLI::Option* kind_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--model", model, artifact("checkpoint to evaluate, or 'oracle'"));
        add_process_options(app, process, "--process", false);
        process_opt = app->get_option("--process");
        add_grid_options(app, grid);
        kind_opt = app->get_option("--kind");
        app->add_option("--bump-rel", bump_rel, artifact("relative spot bump for Heston Greeks"));
        app->add_flag("--gamma", gamma, artifact("include gamma columns"));
        app->add_option("--curves", curves, artifact("also write error curves to this CSV"));
        app->add_option("--curve-ttm", curve_ttm, paper("maturity of the error curves"));
        app->add_option("--curve-strike", curve_strike, paper("strike of the error curves"));
        app->add_option("--curve-vol", curve_vol, artifact("vol of the error curves"));
        app->add_option("--curve-points", curve_points, artifact("spots on the error curves"));
    }

    int run(std::ostream& out, std::ostream& err) {
        const bool oracle_model = model == "oracle";
        std::optional<MlpParams> params;
        if (!oracle_model) {
            params = load_model(model);
            if (process_opt->count() == 0) {
                process.process = params->meta.process;
            } else if (params->meta.process != process.process) {
                throw MismatchError("checkpoint was trained on " + params->meta.process +
                                    " paths but the oracle is " + process.process);
            }
            if (kind_opt->count() == 0) {
                grid.kind = to_string(params->meta.kind);
            } else if (grid.kind != to_string(params->meta.kind)) {
                throw MismatchError(std::string("checkpoint prices ") +
                                    to_string(params->meta.kind) + "s, grid asks for " +
                                    grid.kind + "s");
            }
        }
        std::vector<double> vols = parse_list(grid.vols, "vols");
        if (vols.empty()) {
            vols = {process.kind() == ProcessKind::gbm ? process.sigma : process.xi};
        }
        const EvalGrid g = build_grid(grid, vols, parse_kind(grid.kind));
        if (grid.dry_run) {
            emit(grid.out, out, [&](std::ostream& s) { print_plan(plan_sweep(g, grid.runs, &s), s); });
            return kOk;
        }
        if (process.kind() == ProcessKind::heston) require_valid(process.heston());
        OracleSpec spec = oracle_spec(process, grid.rate);
        spec.bump_rel = bump_rel;

        RunEvaluation run;
        if (oracle_model) {
            for (double v : g.vols) {
                EvalGrid one = g;
                one.vols = {v};
                const auto self = make_oracle(spec, v);
                const RunEvaluation part = evaluate(*self, one, spec);
                run.grid_hash = part.grid_hash;
                run.cells.insert(run.cells.end(), part.cells.begin(), part.cells.end());
                run.skipped += part.skipped;
                run.total += part.total;
            }
        } else {
            const NetworkModel net(*params);
            run = evaluate(net, g, spec);
            run.seed = params->meta.seed;
        }
        if (run.skip_flag()) {
            err << "warning: " << run.skipped << " of " << run.total
                << " grid points skipped (above 0.1%)\n";
        }
        const bool with_gamma = gamma || (params && params->meta.loss == "delta_gamma");
        const EvalReport rep = aggregate({&run, 1}, to_string(spec.kind), with_gamma);
        emit(grid.out, out, [&](std::ostream& s) { emit_table(rep, s); });

        if (!curves.empty()) {
            const double v = curve_vol.value_or(g.vols.front());
            const auto oracle = make_oracle(spec, v);
            std::unique_ptr<PricingModel> m;
            if (params) {
                m = std::make_unique<NetworkModel>(*params);
            } else {
                m = make_oracle(spec, v);
            }
            const CurveSpec cs{curve_ttm, curve_strike, grid.rate, g.kind};
            const auto spots = linspace(grid.spot_low, grid.spot_high, curve_points);
            std::ofstream f(curves);
            if (!f) throw Error("cannot write " + curves);
            emit_error_curves(*m, *oracle, cs, spots, f);
        }
        return kOk;
    }
};

// ---------------------------------------------------------------- table

double kv_number(const std::map<std::string, std::string>& kv, const std::string& key,
                 const fs::path& file) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(file.string() + ": missing key '" + key + "'");
    try {
        return std::stod(it->second);
    } catch (const std::logic_error&) {
        throw ConfigError(file.string() + ": bad value for '" + key + "'");
    }
}

struct TableCmd {
    GridOpts grid;
    std::vector<std::string> run_dirs;
    double bump_rel = 1e-3;

    void add(CLI::App* app) {
        app->add_option("--run-dir", run_dirs, artifact("run directory (runs/<tag>); repeatable"))
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
        add_grid_options(app, grid);
        app->add_option("--bump-rel", bump_rel, artifact("relative spot bump for Heston Greeks"));
    }

    int run(std::ostream& out, std::ostream& err) {
        if (grid.dry_run) {
            std::vector<double> vols = parse_list(grid.vols, "vols");
            if (vols.empty()) vols = {0.125, 0.15, 0.175};
            const EvalGrid g = build_grid(grid, vols, parse_kind(grid.kind));
            emit(grid.out, out, [&](std::ostream& s) { print_plan(plan_sweep(g, grid.runs, &s), s); });
            return kOk;
        }
        if (run_dirs.empty()) throw ConfigError("table needs at least one --run-dir");

        std::vector<RunEvaluation> runs;
        std::optional<std::string> process;
        std::optional<std::string> kind;
        bool with_gamma = false;
        std::string engine;
        for (const auto& dir : run_dirs) {
            if (!fs::is_directory(dir)) throw ConfigError("not a run directory: " + dir);
            std::vector<fs::path> seeds;
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.is_directory() && e.path().filename().string().rfind("seed", 0) == 0) {
                    seeds.push_back(e.path());
                }
            }
            std::sort(seeds.begin(), seeds.end());
            if (seeds.empty()) throw ConfigError("no seed directories under " + dir);
            for (const auto& sd : seeds) {
                const fs::path snap = sd / "config.snapshot";
                if (!fs::exists(snap)) throw ConfigError("missing " + snap.string());
                std::map<std::string, std::string> kv;
                for (auto& [k, v] : read_key_values(snap)) kv[k] = v;
                const MlpParams params = load_model((sd / "model.ckpt").string());

                ProcessOpts p;
                p.process = kv.count("process") ? kv["process"] : params.meta.process;
                if (p.process != params.meta.process) {
                    throw MismatchError(sd.string() + ": snapshot and checkpoint disagree on the process");
                }
                if (process && *process != p.process) {
                    throw MismatchError("run directories mix gbm and heston models");
                }
                process = p.process;
                const std::string k = to_string(params.meta.kind);
                if (kind && *kind != k) throw MismatchError("run directories mix calls and puts");
                kind = k;
                if (p.kind() == ProcessKind::gbm) {
                    p.sigma = kv_number(kv, "sigma", snap);
                } else {
                    p.kappa = kv_number(kv, "kappa", snap);
                    p.theta = kv_number(kv, "theta", snap);
                    p.xi = kv_number(kv, "xi", snap);
                    p.rho = kv_number(kv, "rho", snap);
                    p.v0 = kv_number(kv, "v0", snap);
                }
                const double rate = kv.count("rate") ? kv_number(kv, "rate", snap) : grid.rate;
                OracleSpec spec = oracle_spec(p, rate);
                spec.bump_rel = bump_rel;
                engine = to_string(spec.kind);
                const double vol = p.kind() == ProcessKind::gbm ? p.sigma : p.xi;
                const EvalGrid g = build_grid(grid, {vol}, params.meta.kind);

                const NetworkModel net(params);
                RunEvaluation r = evaluate(net, g, spec);
                r.seed = params.meta.seed;
                if (params.meta.loss == "delta_gamma") {
                    r.hedge_ttm = kv_number(kv, "atm-ttm", snap);
                    with_gamma = true;
                }
                if (r.skip_flag()) {
                    err << "warning: " << sd.string() << ": " << r.skipped << " of " << r.total
                        << " grid points skipped (above 0.1%)\n";
                }
                err << "evaluated " << sd.string() << '\n';
                runs.push_back(std::move(r));
            }
        }
        const EvalReport rep = aggregate(runs, engine, with_gamma);
        emit(grid.out, out, [&](std::ostream& s) { emit_table(rep, s); });
        return kOk;
    }
};

// ---------------------------------------------------------------- price

struct PriceCmd {
    ProcessOpts process;
    std::string engine = "bs";
    std::string model;
    double spot = 100.0;
    double strike = 100.0;
    double ttm = 0.24;
    double rate = 0.0;
    std::string kind = "call";
    std::size_t mc_paths = 200000;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 0;
    double bump_rel = 1e-3;

    void add(CLI::App* app) {
        app->add_option("--engine", engine, artifact("pricing engine"))
            ->check(CLI::IsMember({"bs", "heston-cf", "mc"}));
        app->add_option("--model", model, artifact("price with this checkpoint instead"));
        app->add_option("--spot", spot, artifact("spot"));
        app->add_option("--strike", strike, artifact("strike"));
        app->add_option("--ttm", ttm, artifact("time to maturity in years"));
        app->add_option("--rate", rate, paper("risk-free rate"));
        app->add_option("--kind", kind, artifact("option kind"))
            ->check(CLI::IsMember({"call", "put"}));
        add_process_options(app, process, "--process", false);
        app->add_option("--mc-paths", mc_paths, paper("Monte Carlo paths (antithetic)"));
        app->add_option("--dt", dt, paper("Monte Carlo step in years"));
        app->add_option("--seed", seed, artifact("Monte Carlo seed"));
        app->add_option("--bump-rel", bump_rel, artifact("relative spot bump for Heston Greeks"));
    }

    int run(std::ostream& out) {
        const OptionSpec opt{strike, ttm, rate, parse_kind(kind)};
        require_valid(opt);
        if (!(spot > 0.0)) throw DomainError("--spot must be > 0");
        std::optional<double> price;
        std::optional<Greeks> greeks;
        std::optional<double> se;
        if (!model.empty()) {
            const MlpParams p = load_model(model);
            if (p.meta.kind != opt.kind) {
                throw MismatchError(std::string("checkpoint prices ") + to_string(p.meta.kind) + "s");
            }
            const PriceGreeks pg = price_delta_gamma(p, spot, opt);
            price = pg.price;
            greeks = Greeks{pg.delta, pg.gamma};
        } else if (engine == "bs") {
            price = bs_price(spot, opt, process.sigma);
            if (ttm > 0.0 && process.sigma > 0.0) greeks = bs_greeks(spot, opt, process.sigma);
        } else if (engine == "heston-cf") {
            HestonParams h = process.heston();
            h.s0 = spot;
            price = heston_price_cf(spot, opt, h);
            if (ttm > 0.0) greeks = heston_greeks_bump(spot, opt, h, {}, bump_rel);
        } else {
            if (!(ttm > 0.0)) throw DomainError("--ttm must be > 0 for Monte Carlo");
            SimOptions so;
            so.n_paths = mc_paths + (mc_paths % 2);
            so.n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ttm / dt)));
            so.dt = ttm / static_cast<double>(so.n_steps);
            so.seed = seed;
            so.antithetic = true;
            const PathSet paths = [&] {
                if (process.kind() == ProcessKind::gbm) {
                    return simulate_gbm({rate, process.sigma, spot}, so);
                }
                HestonParams h = process.heston();
                h.mu = rate;
                h.s0 = spot;
                return simulate_heston(h, so);
            }();
            const McEstimate m = mc_price(paths, opt);
            price = m.price;
            se = m.std_error;
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "price=%.6f", *price);
        out << buf;
        if (greeks) {
            std::snprintf(buf, sizeof buf, " delta=%.6f gamma=%.6f", greeks->delta, greeks->gamma);
            out << buf;
        }
        if (se) {
            std::snprintf(buf, sizeof buf, " se=%.6f", *se);
            out << buf;
        }
        out << '\n';
        return kOk;
    }
};

// ---------------------------------------------------------------- config files

// Splices `--key=value` for every config entry the subcommand knows right
// after the subcommand name, so explicit flags (parsed later, last one wins)
// take precedence over the file.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args,
                                       std::ostream& err) {
    std::size_t sub_pos = args.size();
    CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].empty() && args[i][0] != '-') {
            sub = app.get_subcommand_no_throw(args[i]);
            sub_pos = i;
            break;
        }
    }
    if (!sub) return args;
    std::optional<std::string> file;
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
    }
    if (!file) return args;
    if (!fs::exists(*file)) throw ConfigError("config file not found: " + *file);

    std::set<std::string> known_anywhere;
    for (const CLI::App* s : app.get_subcommands({})) {
        for (const CLI::Option* o : s->get_options()) {
            for (const auto& n : o->get_lnames()) known_anywhere.insert(n);
        }
    }
    std::vector<std::string> spliced;
    for (const auto& [k, v] : read_key_values(*file)) {
        if (sub->get_option_no_throw("--" + k) != nullptr) {
            spliced.push_back("--" + k + "=" + v);
        } else if (!known_anywhere.count(k)) {
            err << "warning: " << *file << ": unknown key '" << k << "' ignored\n";
        }
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
    out.insert(out.end(), spliced.begin(), spliced.end());
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
    return out;
}

}  // namespace

KeyValues read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    KeyValues kv;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
        }
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

void write_key_values(const KeyValues& kv, std::ostream& out) {
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"finn: option pricing networks trained on hedging losses.\n"
                 "Defaults marked [paper] follow the reference experiments; [artifact] marks "
                 "choices made here."};
    app.option_defaults()->always_capture_default()->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SimulateCmd simulate;
    TrainCmd train_cmd;
    EvaluateCmd evaluate_cmd;
    TableCmd table;
    PriceCmd price;
    std::string config_file;
    auto with_config = [&](CLI::App* s) {
        s->add_option("--config", config_file, artifact("flat key=value file; flags override it"));
        return s;
    };
    CLI::App* s_sim = with_config(app.add_subcommand("simulate", "simulate price paths to CSV"));
    CLI::App* s_train = with_config(app.add_subcommand("train", "train pricing networks"));
    CLI::App* s_eval =
        with_config(app.add_subcommand("evaluate", "compare a model with the analytic oracle"));
    CLI::App* s_table =
        with_config(app.add_subcommand("table", "aggregate run directories into a table"));
    CLI::App* s_price = with_config(app.add_subcommand("price", "price one option"));
    simulate.add(s_sim);
    train_cmd.add(s_train);
    evaluate_cmd.add(s_eval);
    table.add(s_table);
    price.add(s_price);

    try {
        std::vector<std::string> argv = expand_config(app, args, err);
        std::reverse(argv.begin(), argv.end());
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (s_sim->parsed()) return simulate.run(args, out, err);
        if (s_train->parsed()) return train_cmd.run(args, out, err);
        if (s_eval->parsed()) return evaluate_cmd.run(out, err);
        if (s_table->parsed()) return table.run(out, err);
        if (s_price->parsed()) return price.run(out);
        return kUsage;
    } catch (const FellerError& e) {
        err << "error: " << e.what() << '\n';
        return kFeller;
    } catch (const TrainingAborted& e) {
        err << "error: training aborted at epoch " << e.epoch() << ", batch " << e.batch() << ": "
            << e.what() << '\n';
        return kAborted;
    } catch (const MismatchError& e) {
        err << "error: " << e.what() << '\n';
        return kMismatch;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace finn::cli
