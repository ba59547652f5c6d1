#pragma once

#include <span>

#include <Eigen/Core>

#include "finn/model/mlp.hpp"

namespace finn {

/// Batched evaluation of the pricing network with second-order moneyness
/// jets, and the matching reverse sweep: given adjoints of the output's
/// (value, d1, d2) channels it accumulates exact parameter gradients. This
/// is the same reverse-over-forward scheme as ad::Tape, expressed per layer
/// so the work maps onto dense matrix products.
///
/// Activations of the last forward() are cached for backward(); one object
/// per thread.
class MlpBatch {
public:
    /// `with_jets = false` evaluates only the value channel.
    void forward(const MlpParams& params, std::span<const double> moneyness,
                 std::span<const double> ttm, bool with_jets);

    Eigen::Index size() const { return batch_; }
    bool has_jets() const { return channels_ == 3; }

    const Eigen::ArrayXd& value() const { return g_v_; }
    const Eigen::ArrayXd& d1() const { return g_1_; }
    const Eigen::ArrayXd& d2() const { return g_2_; }

    /// grad += d/dtheta sum_b (adj_v[b] g_b + adj_d1[b] g'_b + adj_d2[b] g''_b).
    /// adj_d1 / adj_d2 must be empty for a value-only forward pass.
    void backward(const MlpParams& params, const Eigen::ArrayXd& adj_v,
                  const Eigen::ArrayXd& adj_d1, const Eigen::ArrayXd& adj_d2,
                  std::span<double> grad) const;

private:
    Eigen::Index batch_ = 0;
    int channels_ = 1;
    Eigen::RowVectorXd m_;  // standardised inputs
    Eigen::RowVectorXd tau_;
    // Channel blocks stacked horizontally: [value | d1 | d2], each H x B.
    Eigen::MatrixXd a1_;
    Eigen::MatrixXd z2_;
    Eigen::MatrixXd a2_;
    Eigen::ArrayXd z3_v_, z3_1_, z3_2_;
    Eigen::ArrayXd g_v_, g_1_, g_2_;
};

}  // namespace finn
