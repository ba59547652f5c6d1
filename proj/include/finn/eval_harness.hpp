#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finn/market_sim.hpp"
#include "finn/pricers/heston.hpp"
#include "finn/pricing_model.hpp"

namespace finn {

/// The evaluation sweep. `vols` holds GBM volatilities or Heston
/// vol-of-vols, depending on the oracle.
struct EvalGrid {
    std::vector<double> spots;
    std::vector<double> strikes;
    std::vector<double> ttms;
    std::vector<double> vols;
    OptionKind kind = OptionKind::call;

    /// 10,000 spots on [75, 125], strikes 90..110, maturities 0.24..0.48
    /// step 0.04, vols {0.125, 0.15, 0.175}.
    static EvalGrid standard();

    /// Hash of spots, strikes, ttms and kind; vols are cell keys and do not
    /// enter, so single-vol runs of one sweep stay comparable.
    std::uint64_t hash() const;
};

/// Throws ConfigError for empty or unsorted axes.
void validate(const EvalGrid& g);

/// n evenly spaced points on [lo, hi] (inclusive).
std::vector<double> linspace(double lo, double hi, std::size_t n);

enum class OracleKind { black_scholes, heston_cf };
const char* to_string(OracleKind k);

struct OracleSpec {
    OracleKind kind = OracleKind::black_scholes;
    double rate = 0.0;
    HestonParams heston;  // xi is replaced by the grid vol
    QuadratureConfig quad;
    double bump_rel = 1e-3;
};

/// The oracle for one grid vol.
std::unique_ptr<PricingModel> make_oracle(const OracleSpec& spec, double vol);

struct ErrorStats {
    double price_mad = 0.0, price_mse = 0.0;
    double delta_mad = 0.0, delta_mse = 0.0;
    double gamma_mad = 0.0, gamma_mse = 0.0;
};

struct CellResult {
    double vol = 0.0;
    double ttm = 0.0;
    std::size_t n_points = 0;
    std::size_t n_skipped = 0;
    ErrorStats stats;
};

/// One run against one oracle over the whole grid, cells ordered vol outer,
/// ttm inner.
struct RunEvaluation {
    std::vector<CellResult> cells;
    std::uint64_t grid_hash = 0;
    std::uint64_t seed = 0;
    std::optional<double> hedge_ttm;
    std::size_t skipped = 0;
    std::size_t total = 0;
    /// More than 0.1% of points skipped.
    bool skip_flag() const { return total != 0 && skipped * 1000 > total; }
};

/// `model` against the oracle at every grid point. Points where the oracle
/// or model fails are skipped and counted.
RunEvaluation evaluate(const PricingModel& model, const EvalGrid& grid, const OracleSpec& oracle);

/// Mean and sample standard deviation; `std` is empty with fewer than two runs.
struct Moments {
    double mean = 0.0;
    std::optional<double> std;
};

struct ReportCell {
    double vol = 0.0;
    std::optional<double> hedge_ttm;
    double ttm = 0.0;
    std::size_t n_runs = 0;
    Moments price_mad, price_mse, delta_mad, delta_mse, gamma_mad, gamma_mse;
};

struct EvalReport {
    std::vector<ReportCell> cells;
    std::string engine;
    std::uint64_t grid_hash = 0;
    std::vector<std::uint64_t> seeds;
    bool with_gamma = false;
    bool with_hedge_ttm = false;
};

/// Folds runs into per-cell moments. Runs are ordered by seed first, so the
/// result does not depend on the order they are passed in. Throws
/// ConfigError if the runs were evaluated on different grids.
EvalReport aggregate(std::span<const RunEvaluation> runs, const std::string& engine,
                     bool with_gamma);

/// `vol,[hedge_ttm,]ttm,price_mad,price_mad_std,...` with 6 significant
/// digits; missing standard deviations are written as `NA`.
void emit_table(const EvalReport& report, std::ostream& out);

/// Parses what emit_table wrote.
EvalReport parse_table(std::istream& in);

struct CurveSpec {
    double ttm = 0.24;
    double strike = 100.0;
    double rate = 0.0;
    OptionKind kind = OptionKind::call;
};

/// `spot,price_model,price_oracle,price_dev,delta_model,...,gamma_dev`, one
/// row per spot.
void emit_error_curves(const PricingModel& model, const PricingModel& oracle,
                       const CurveSpec& spec, std::span<const double> spots, std::ostream& out);

struct SweepPlan {
    std::size_t runs = 0;
    std::size_t cells = 0;         // vol x ttm
    std::size_t contracts = 0;     // vol x ttm x strike
    std::size_t points_per_run = 0;
    std::size_t total_points = 0;
};

/// Enumerates the sweep without pricing anything; if `listing` is given
/// one line per (vol, ttm, strike) contract is written to it.
SweepPlan plan_sweep(const EvalGrid& grid, std::size_t runs, std::ostream* listing = nullptr);

}  // namespace finn
