#include "finn/eval_harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "finn/error.hpp"

namespace finn {

namespace {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ull;
    void byte(std::uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    void u64(std::uint64_t x) {
        for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(x >> (8 * i)));
    }
    void axis(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) u64(std::bit_cast<std::uint64_t>(x));
    }
};

void require_axis(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("eval grid: ") + name + " is empty");
    if (!std::is_sorted(v.begin(), v.end())) {
        throw ConfigError(std::string("eval grid: ") + name + " is not sorted");
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw ConfigError(std::string("eval grid: non-finite ") + name);
    }
}

struct Accumulator {
    double abs_p = 0, sq_p = 0, abs_d = 0, sq_d = 0, abs_g = 0, sq_g = 0;
    std::size_t n = 0;

    void add(const PriceGreeks& m, const PriceGreeks& o) {
        const double dp = m.price - o.price;
        const double dd = m.delta - o.delta;
        const double dg = m.gamma - o.gamma;
        abs_p += std::abs(dp);
        sq_p += dp * dp;
        abs_d += std::abs(dd);
        sq_d += dd * dd;
        abs_g += std::abs(dg);
        sq_g += dg * dg;
        ++n;
    }

    ErrorStats stats() const {
        if (n == 0) return {};
        const auto k = static_cast<double>(n);
        return {abs_p / k, sq_p / k, abs_d / k, sq_d / k, abs_g / k, sq_g / k};
    }
};

bool finite(const PriceGreeks& p) {
    return std::isfinite(p.price) && std::isfinite(p.delta) && std::isfinite(p.gamma);
}

// Whole-contract batch first; on failure fall back to point by point so a
// single bad point only costs itself.
void evaluate_contract(const PricingModel& model, const PricingModel& oracle,
                       const OptionSpec& opt, std::span<const double> spots,
                       std::vector<PriceGreeks>& m, std::vector<PriceGreeks>& o,
                       Accumulator& acc, std::size_t& skipped) {
    m.resize(spots.size());
    o.resize(spots.size());
    bool batch_ok = true;
    try {
        model.evaluate(spots, opt, m);
        oracle.evaluate(spots, opt, o);
    } catch (const Error&) {
        batch_ok = false;
    }
    for (std::size_t i = 0; i < spots.size(); ++i) {
        if (!batch_ok) {
            try {
                m[i] = model.at(spots[i], opt);
                o[i] = oracle.at(spots[i], opt);
            } catch (const Error&) {
                ++skipped;
                continue;
            }
        }
        if (!finite(m[i]) || !finite(o[i])) {
            ++skipped;
            continue;
        }
        acc.add(m[i], o[i]);
    }
}

Moments moments(const std::vector<double>& x) {
    Moments m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    if (x.size() >= 2) {
        double ss = 0.0;
        for (double v : x) ss += (v - m.mean) * (v - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(x.size() - 1));
    }
    return m;
}

void put_moments(std::ostream& out, const Moments& m) {
    out << ',' << m.mean << ',';
    if (m.std) {
        out << *m.std;
    } else {
        out << "NA";
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

const char* const kMetrics[] = {"price_mad", "price_mse", "delta_mad",
                                "delta_mse", "gamma_mad", "gamma_mse"};

Moments* metric(ReportCell& c, int i) {
    Moments* all[] = {&c.price_mad, &c.price_mse, &c.delta_mad,
                      &c.delta_mse, &c.gamma_mad, &c.gamma_mse};
    return all[i];
}

}  // namespace

EvalGrid EvalGrid::standard() {
    EvalGrid g;
    g.spots = linspace(75.0, 125.0, 10000);
    for (int k = 90; k <= 110; ++k) g.strikes.push_back(k);
    for (int i = 0; i <= 6; ++i) g.ttms.push_back(0.24 + 0.04 * i);
    g.vols = {0.125, 0.15, 0.175};
    return g;
}

std::uint64_t EvalGrid::hash() const {
    Fnv1a f;
    f.axis(spots);
    f.axis(strikes);
    f.axis(ttms);
    f.byte(kind == OptionKind::call ? 0 : 1);
    return f.h;
}

void validate(const EvalGrid& g) {
    require_axis(g.spots, "spots");
    require_axis(g.strikes, "strikes");
    require_axis(g.ttms, "ttms");
    require_axis(g.vols, "vols");
    if (!(g.spots.front() > 0.0) || !(g.strikes.front() > 0.0) || !(g.ttms.front() > 0.0) ||
        !(g.vols.front() > 0.0)) {
        throw ConfigError("eval grid: spots, strikes, ttms and vols must be > 0");
    }
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> v(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
    v.back() = hi;
    return v;
}

const char* to_string(OracleKind k) {
    return k == OracleKind::black_scholes ? "bs" : "heston-cf";
}

std::unique_ptr<PricingModel> make_oracle(const OracleSpec& spec, double vol) {
    if (spec.kind == OracleKind::black_scholes) return std::make_unique<BlackScholesModel>(vol);
    HestonParams p = spec.heston;
    p.xi = vol;
    return std::make_unique<HestonModel>(p, spec.quad, spec.bump_rel);
}

RunEvaluation evaluate(const PricingModel& model, const EvalGrid& grid, const OracleSpec& oracle) {
    validate(grid);
    RunEvaluation run;
    run.grid_hash = grid.hash();
    std::vector<PriceGreeks> m;
    std::vector<PriceGreeks> o;
    for (double vol : grid.vols) {
        const auto ref = make_oracle(oracle, vol);
        for (double ttm : grid.ttms) {
            CellResult cell;
            cell.vol = vol;
            cell.ttm = ttm;
            Accumulator acc;
            for (double strike : grid.strikes) {
                const OptionSpec opt{strike, ttm, oracle.rate, grid.kind};
                evaluate_contract(model, *ref, opt, grid.spots, m, o, acc, cell.n_skipped);
            }
            cell.n_points = acc.n + cell.n_skipped;
            cell.stats = acc.stats();
            run.skipped += cell.n_skipped;
            run.total += cell.n_points;
            run.cells.push_back(cell);
        }
    }
    return run;
}

EvalReport aggregate(std::span<const RunEvaluation> runs, const std::string& engine,
                     bool with_gamma) {
    if (runs.empty()) throw ConfigError("aggregate: no runs");
    std::vector<const RunEvaluation*> sorted;
    for (const auto& r : runs) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->seed != b->seed) return a->seed < b->seed;
        const std::size_t n = std::min(a->cells.size(), b->cells.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (a->cells[i].stats.price_mad != b->cells[i].stats.price_mad) {
                return a->cells[i].stats.price_mad < b->cells[i].stats.price_mad;
            }
        }
        return false;
    });

    EvalReport rep;
    rep.engine = engine;
    rep.with_gamma = with_gamma;
    rep.grid_hash = sorted.front()->grid_hash;
    using Key = std::tuple<double, double, double>;
    std::map<Key, std::vector<const CellResult*>> groups;
    std::map<Key, std::optional<double>> hedge;
    for (const auto* r : sorted) {
        if (r->grid_hash != rep.grid_hash) {
            throw ConfigError("aggregate: runs were evaluated on different grids");
        }
        rep.seeds.push_back(r->seed);
        rep.with_hedge_ttm = rep.with_hedge_ttm || r->hedge_ttm.has_value();
        for (const auto& c : r->cells) {
            const Key k{c.vol, r->hedge_ttm.value_or(-1.0), c.ttm};
            groups[k].push_back(&c);
            hedge[k] = r->hedge_ttm;
        }
    }
    for (const auto& [k, cells] : groups) {
        ReportCell rc;
        rc.vol = std::get<0>(k);
        rc.hedge_ttm = hedge[k];
        rc.ttm = std::get<2>(k);
        rc.n_runs = cells.size();
        std::vector<double> x(cells.size());
        auto fold = [&](double ErrorStats::*f) {
            for (std::size_t i = 0; i < cells.size(); ++i) x[i] = cells[i]->stats.*f;
            return moments(x);
        };
        rc.price_mad = fold(&ErrorStats::price_mad);
        rc.price_mse = fold(&ErrorStats::price_mse);
        rc.delta_mad = fold(&ErrorStats::delta_mad);
        rc.delta_mse = fold(&ErrorStats::delta_mse);
        rc.gamma_mad = fold(&ErrorStats::gamma_mad);
        rc.gamma_mse = fold(&ErrorStats::gamma_mse);
        rep.cells.push_back(rc);
    }
    return rep;
}

void emit_table(const EvalReport& report, std::ostream& out) {
    const int n_metrics = report.with_gamma ? 6 : 4;
    out << "vol";
    if (report.with_hedge_ttm) out << ",hedge_ttm";
    out << ",ttm";
    for (int i = 0; i < n_metrics; ++i) out << ',' << kMetrics[i] << ',' << kMetrics[i] << "_std";
    out << '\n';
    const auto old_prec = out.precision(6);
    const auto old_flags = out.flags();
    out.unsetf(std::ios::floatfield);
    for (ReportCell c : report.cells) {
        out << c.vol;
        if (report.with_hedge_ttm) {
            out << ',';
            if (c.hedge_ttm) {
                out << *c.hedge_ttm;
            } else {
                out << "NA";
            }
        }
        out << ',' << c.ttm;
        for (int i = 0; i < n_metrics; ++i) put_moments(out, *metric(c, i));
        out << '\n';
    }
    out.precision(old_prec);
    out.flags(old_flags);
    if (!out) throw Error("emit_table: write failed");
}

EvalReport parse_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("table: missing header");
    const auto header = split(line);
    EvalReport rep;
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    if (!col.count("vol") || !col.count("ttm")) throw FormatError("table: missing vol/ttm");
    rep.with_hedge_ttm = col.count("hedge_ttm") != 0;
    rep.with_gamma = col.count("gamma_mad") != 0;
    const int n_metrics = rep.with_gamma ? 6 : 4;
    auto num = [](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw FormatError("table: bad number '" + s + "'");
            return v;
        } catch (const std::logic_error&) {
            throw FormatError("table: bad number '" + s + "'");
        }
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) throw FormatError("table: ragged row");
        ReportCell c;
        c.vol = num(f[col["vol"]]);
        c.ttm = num(f[col["ttm"]]);
        if (rep.with_hedge_ttm && f[col["hedge_ttm"]] != "NA") c.hedge_ttm = num(f[col["hedge_ttm"]]);
        for (int i = 0; i < n_metrics; ++i) {
            const std::string name = kMetrics[i];
            if (!col.count(name) || !col.count(name + "_std")) {
                throw FormatError("table: missing column " + name);
            }
            Moments* m = metric(c, i);
            m->mean = num(f[col[name]]);
            const std::string& s = f[col[name + "_std"]];
            if (s != "NA") m->std = num(s);
        }
        rep.cells.push_back(c);
    }
    return rep;
}

void emit_error_curves(const PricingModel& model, const PricingModel& oracle,
                       const CurveSpec& spec, std::span<const double> spots, std::ostream& out) {
    const OptionSpec opt{spec.strike, spec.ttm, spec.rate, spec.kind};
    std::vector<PriceGreeks> m(spots.size());
    std::vector<PriceGreeks> o(spots.size());
    model.evaluate(spots, opt, m);
    oracle.evaluate(spots, opt, o);
    out << "spot,price_model,price_oracle,price_dev,delta_model,delta_oracle,delta_dev,"
           "gamma_model,gamma_oracle,gamma_dev\n";
    const auto old = out.precision(10);
    for (std::size_t i = 0; i < spots.size(); ++i) {
        out << spots[i] << ',' << m[i].price << ',' << o[i].price << ','
            << m[i].price - o[i].price << ',' << m[i].delta << ',' << o[i].delta << ','
            << m[i].delta - o[i].delta << ',' << m[i].gamma << ',' << o[i].gamma << ','
            << m[i].gamma - o[i].gamma << '\n';
    }
    out.precision(old);
    if (!out) throw Error("emit_error_curves: write failed");
}

SweepPlan plan_sweep(const EvalGrid& grid, std::size_t runs, std::ostream* listing) {
    validate(grid);
    if (runs == 0) throw ConfigError("plan: runs must be >= 1");
    SweepPlan p;
    p.runs = runs;
    p.cells = grid.vols.size() * grid.ttms.size();
    p.contracts = p.cells * grid.strikes.size();
    p.points_per_run = p.contracts * grid.spots.size();
    p.total_points = p.points_per_run * runs;
    if (listing) {
        for (double vol : grid.vols) {
            for (double ttm : grid.ttms) {
                for (double k : grid.strikes) {
                    *listing << "vol=" << vol << " ttm=" << ttm << " strike=" << k
                             << " spots=" << grid.spots.size() << " runs=" << runs << '\n';
                }
            }
        }
    }
    return p;
}

}  // namespace finn
