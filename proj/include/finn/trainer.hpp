#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "finn/hedging_loss.hpp"
#include "finn/market_sim.hpp"
#include "finn/model/mlp.hpp"
#include "finn/pricers/heston.hpp"

namespace finn {

enum class ProcessKind { gbm, heston };
const char* to_string(ProcessKind p);

struct TrainConfig {
    ProcessKind process = ProcessKind::gbm;
    GbmParams gbm;
    HestonParams heston;
    HedgeMode hedge_mode = HedgeMode::delta;
    double atm_ttm = 30.0 / 250.0;
    NextGradient next_gradient = NextGradient::detached;
    // Detached mode prices the next step with a copy of the parameters
    // refreshed every target_sync batches; 0 uses the live parameters.
    int target_sync = 50;
    OptionKind kind = OptionKind::call;

    int epochs = 250;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    // Learning rate decays geometrically to learning_rate * lr_final_ratio
    // at the last planned epoch.
    double lr_final_ratio = 0.01;
    int patience = 50;
    double grad_clip = 10.0;
    double grad_abort = 1e6;

    std::array<double, 2> strike_range{90.0, 110.0};
    // Drawn on the step grid, so the shortest maturity ends exactly at expiry.
    std::array<double, 2> ttm_range{1.0 / 250.0, 0.48};

    std::size_t n_train_paths = 1800;
    std::size_t n_val_paths = 200;
    std::size_t n_steps = 0;  // 0: just long enough for the longest maturity
    double dt = 1.0 / 250.0;
    double rate = 0.0;
    std::uint64_t seed = 0;
    QuadratureConfig quad;
};

/// Throws ConfigError (FellerError for Heston parameter violations).
void validate(const TrainConfig& cfg);

/// Steps that will actually be simulated.
std::size_t simulation_steps(const TrainConfig& cfg);

/// The training data: one sample per (path, step) with a strike and a
/// maturity drawn from the augmentation stream keyed by (seed, path, step).
struct SampleSet {
    std::vector<HedgeSample> train;
    std::vector<HedgeSample> validation;
    std::size_t rejected = 0;  // hedging-option gamma at or below the floor
};

PathSet simulate_training_paths(const TrainConfig& cfg);
SampleSet build_samples(const PathSet& paths, const TrainConfig& cfg);

/// Training samples chunked into batches in (path, step) order.
std::vector<std::vector<HedgeSample>> build_batches(const PathSet& paths, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::size_t delta_clips = 0;
    std::size_t gamma_clips = 0;
    double seconds = 0.0;
};

struct TrainResult {
    MlpParams params;  // best validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    std::size_t rejected_samples = 0;
};

/// Called after each epoch; used for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the hedging loss with early stopping on the validation loss.
/// Epoch 0 records the untrained network. Deterministic in (cfg, seed).
/// Throws TrainingAborted on a non-finite loss or exploding gradient.
TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct RunOutcome {
    std::uint64_t seed = 0;
    std::optional<TrainResult> result;
    std::string error;  // set when the run failed
    bool aborted = false;  // failed with TrainingAborted
};

/// Independent runs with seeds cfg.seed + i. A failing run is reported, not
/// fatal to the others.
std::vector<RunOutcome> multi_run(const TrainConfig& cfg, int n_runs,
                                  const std::function<void(std::uint64_t, const EpochRecord&)>&
                                      on_epoch = {});

/// `epoch,train_loss,val_loss,delta_clips,gamma_clips,seconds`.
void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

}  // namespace finn
