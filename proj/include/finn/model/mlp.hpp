#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "finn/autodiff/jet.hpp"
#include "finn/autodiff/tape.hpp"
#include "finn/pricers/option.hpp"

namespace finn {

/// Heap buffer with Eigen alignment.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct ModelMeta {
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    std::string process = "gbm";  // gbm | heston
    std::string loss = "delta";   // delta | delta_gamma
    OptionKind kind = OptionKind::call;

    friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

/// Parameters of the 2 -> 50 -> 50 -> 1 pricing network, stored as one flat
/// vector in the order w1 (50x2, column-major), b1, w2 (50x50, column-major),
/// b2, w3 (1x50), b3.
class MlpParams {
public:
    static constexpr int kInputs = 2;
    static constexpr int kHidden = 50;
    static constexpr std::size_t kW1 = 0;
    static constexpr std::size_t kB1 = kW1 + kHidden * kInputs;
    static constexpr std::size_t kW2 = kB1 + kHidden;
    static constexpr std::size_t kB2 = kW2 + kHidden * kHidden;
    static constexpr std::size_t kW3 = kB2 + kHidden;
    static constexpr std::size_t kB3 = kW3 + kHidden;
    static constexpr std::size_t kCount = kB3 + 1;  // 2751

    using MatMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
    using VecMap = Eigen::Map<Eigen::VectorXd>;
    using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

    MlpParams() : theta_(kCount, 0.0) {}

    std::span<double> values() { return theta_; }
    std::span<const double> values() const { return theta_; }

    MatMap w1() { return {theta_.data() + kW1, kHidden, kInputs}; }
    ConstMatMap w1() const { return {theta_.data() + kW1, kHidden, kInputs}; }
    VecMap b1() { return {theta_.data() + kB1, kHidden}; }
    ConstVecMap b1() const { return {theta_.data() + kB1, kHidden}; }
    MatMap w2() { return {theta_.data() + kW2, kHidden, kHidden}; }
    ConstMatMap w2() const { return {theta_.data() + kW2, kHidden, kHidden}; }
    VecMap b2() { return {theta_.data() + kB2, kHidden}; }
    ConstVecMap b2() const { return {theta_.data() + kB2, kHidden}; }
    VecMap w3() { return {theta_.data() + kW3, kHidden}; }
    ConstVecMap w3() const { return {theta_.data() + kW3, kHidden}; }
    double& b3() { return theta_[kB3]; }
    double b3() const { return theta_[kB3]; }

    ModelMeta meta;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;

private:
    AlignedVector theta_;
};

/// Fixed standardisation of the inputs ahead of the first layer:
/// x = ((m - 1) / 0.1, (tau - 0.24) / 0.14).
struct InputScaling {
    static constexpr double kMoneynessCenter = 1.0;
    static constexpr double kMoneynessScale = 0.1;
    static constexpr double kTtmCenter = 0.24;
    static constexpr double kTtmScale = 0.14;
};

/// Network input: moneyness S / (K e^{-r tau}) and time to maturity.
struct ModelInput {
    double moneyness = 1.0;
    double ttm = 0.0;
};

/// LeCun-uniform weights (+-sqrt(3 / fan_in)), zero biases; a pure function
/// of the seed.
MlpParams init_params(std::uint64_t seed);

/// Network output g (normalized price) with d/dm and d^2/dm^2.
/// Throws NumericError naming the layer if an activation is not finite.
ad::Jet2 forward_jet(const MlpParams& params, const ModelInput& input);

/// Records the network on a tape. `params` holds one tape node per network
/// parameter in flat order.
ad::Var record_forward(std::span<const ad::Var> params, ad::Var moneyness, ad::Var ttm);

/// Registers all parameters of `params` on the tape, in flat order.
std::vector<ad::Var> register_parameters(ad::Tape& tape, const MlpParams& params);

/// price = K e^{-r tau} g, delta = g', gamma = g'' / (K e^{-r tau}).
PriceGreeks price_delta_gamma(const MlpParams& params, double spot, const OptionSpec& opt);

struct ClampedGreeks {
    double delta = 0.0;
    double gamma = 0.0;
    bool delta_clipped = false;
    bool gamma_clipped = false;
};

/// Calls: delta in [0, 1]; puts: delta in [-1, 0]; gamma in [0, 1].
ClampedGreeks clamp_greeks(double delta, double gamma, OptionKind kind);

}  // namespace finn
