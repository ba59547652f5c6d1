#include "finn/model/mlp_batch.hpp"

#include <cmath>

#include "finn/error.hpp"

namespace finn {

namespace {

constexpr int H = MlpParams::kHidden;

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;

// Adjoint of y = f(x) through the jet chain rule, with f = tanh evaluated
// from the cached activation t = tanh(x). Channel blocks of width B.
void tanh_backward(const MatrixXd& t_all, const MatrixXd& x_all, MatrixXd& adj, Index b,
                   int channels) {
    const auto t = t_all.leftCols(b).array();
    const ArrayXXd t1 = 1.0 - t.square();
    if (channels == 1) {
        adj.leftCols(b).array() *= t1;
        return;
    }
    const ArrayXXd t2 = -2.0 * t * t1;
    const ArrayXXd t3 = -2.0 * t1.square() - 2.0 * t * t2;
    const auto x1 = x_all.middleCols(b, b).array();
    const auto x2 = x_all.rightCols(b).array();
    const ArrayXXd yv = adj.leftCols(b).array();
    const ArrayXXd y1 = adj.middleCols(b, b).array();
    const ArrayXXd y2 = adj.rightCols(b).array();
    adj.leftCols(b).array() = yv * t1 + y1 * t2 * x1 + y2 * (t3 * x1.square() + t2 * x2);
    adj.middleCols(b, b).array() = y1 * t1 + 2.0 * y2 * t2 * x1;
    adj.rightCols(b).array() = y2 * t1;
}

// Vectorises where std::tanh does not; absolute error stays at rounding level.
template <typename In>
auto fast_tanh(const In& x) {
    return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

// Jet tanh forward: from z channels to activation channels.
void tanh_forward(const MatrixXd& z, MatrixXd& a, Index b, int channels) {
    a.resize(z.rows(), z.cols());
    a.leftCols(b).array() = fast_tanh(z.leftCols(b).array());
    if (channels == 1) return;
    const auto t = a.leftCols(b).array();
    const ArrayXXd t1 = 1.0 - t.square();
    const ArrayXXd t2 = -2.0 * t * t1;
    const auto z1 = z.middleCols(b, b).array();
    const auto z2 = z.rightCols(b).array();
    a.middleCols(b, b).array() = t1 * z1;
    a.rightCols(b).array() = t2 * z1.square() + t1 * z2;
}

}  // namespace

void MlpBatch::forward(const MlpParams& params, std::span<const double> moneyness,
                       std::span<const double> ttm, bool with_jets) {
    if (moneyness.size() != ttm.size()) {
        throw DomainError("MlpBatch: input size mismatch");
    }
    batch_ = static_cast<Index>(moneyness.size());
    channels_ = with_jets ? 3 : 1;
    const Index b = batch_;
    using IS = InputScaling;
    m_ = (Eigen::Map<const Eigen::RowVectorXd>(moneyness.data(), b).array() -
          IS::kMoneynessCenter) *
         (1.0 / IS::kMoneynessScale);
    tau_ = (Eigen::Map<const Eigen::RowVectorXd>(ttm.data(), b).array() - IS::kTtmCenter) *
           (1.0 / IS::kTtmScale);

    const auto w1 = params.w1();
    // Layer 1: z1 = W1 x + b1 with x the standardised (m, tau) and m the
    // seed, so z1.d1 = W1(:, 0) / scale_m and z1.d2 = 0.
    MatrixXd z1(H, b * channels_);
    z1.leftCols(b).noalias() = w1.col(0) * m_ + w1.col(1) * tau_;
    z1.leftCols(b).colwise() += params.b1();
    if (with_jets) {
        z1.middleCols(b, b).colwise() = w1.col(0) * (1.0 / IS::kMoneynessScale);
        z1.rightCols(b).setZero();
    }
    tanh_forward(z1, a1_, b, channels_);

    z2_.resize(H, b * channels_);
    z2_.noalias() = params.w2() * a1_;
    z2_.leftCols(b).colwise() += params.b2();
    tanh_forward(z2_, a2_, b, channels_);

    const Eigen::RowVectorXd z3 = params.w3().transpose() * a2_;
    z3_v_ = z3.leftCols(b).transpose().array() + params.b3();
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-z3_v_).exp());
    g_v_ = (z3_v_ > 0.0).select(z3_v_ + (-z3_v_).exp().log1p(), z3_v_.exp().log1p());
    if (with_jets) {
        z3_1_ = z3.middleCols(b, b).transpose().array();
        z3_2_ = z3.rightCols(b).transpose().array();
        g_1_ = s * z3_1_;
        g_2_ = s * (1.0 - s) * z3_1_.square() + s * z3_2_;
    } else {
        g_1_.resize(0);
        g_2_.resize(0);
    }
    if (!g_v_.allFinite() || (with_jets && (!g_1_.allFinite() || !g_2_.allFinite()))) {
        throw NumericError("network: non-finite activation in layer 3");
    }
}

void MlpBatch::backward(const MlpParams& params, const Eigen::ArrayXd& adj_v,
                        const Eigen::ArrayXd& adj_d1, const Eigen::ArrayXd& adj_d2,
                        std::span<double> grad) const {
    if (grad.size() != MlpParams::kCount) throw DomainError("MlpBatch: wrong gradient size");
    const Index b = batch_;
    const bool jets = channels_ == 3;
    if (adj_v.size() != b || (jets && (adj_d1.size() != b || adj_d2.size() != b)) ||
        (!jets && (adj_d1.size() != 0 || adj_d2.size() != 0))) {
        throw DomainError("MlpBatch: adjoint sizes do not match the forward pass");
    }

    // Softplus output: f' = s, f'' = s(1-s), f''' = s(1-s)(1-2s).
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-z3_v_).exp());
    const Eigen::ArrayXd f2 = s * (1.0 - s);
    Eigen::RowVectorXd adj_z3(b * channels_);
    if (jets) {
        const Eigen::ArrayXd f3 = f2 * (1.0 - 2.0 * s);
        adj_z3.leftCols(b) = (adj_v * s + adj_d1 * f2 * z3_1_ +
                              adj_d2 * (f3 * z3_1_.square() + f2 * z3_2_))
                                 .transpose()
                                 .matrix();
        adj_z3.middleCols(b, b) = (adj_d1 * s + 2.0 * adj_d2 * f2 * z3_1_).transpose().matrix();
        adj_z3.rightCols(b) = (adj_d2 * s).transpose().matrix();
    } else {
        adj_z3 = (adj_v * s).transpose().matrix();
    }

    Eigen::Map<Eigen::VectorXd> g_w1(grad.data() + MlpParams::kW1, H * MlpParams::kInputs);
    Eigen::Map<Eigen::VectorXd> g_b1(grad.data() + MlpParams::kB1, H);
    Eigen::Map<Eigen::MatrixXd> g_w2(grad.data() + MlpParams::kW2, H, H);
    Eigen::Map<Eigen::VectorXd> g_b2(grad.data() + MlpParams::kB2, H);
    Eigen::Map<Eigen::VectorXd> g_w3(grad.data() + MlpParams::kW3, H);

    // Output layer: z3 = w3 . a2 + b3, summed over all channel columns.
    g_w3.noalias() += a2_ * adj_z3.transpose();
    grad[MlpParams::kB3] += adj_z3.leftCols(b).sum();

    MatrixXd adj2 = params.w3() * adj_z3;  // H x (B * channels)
    tanh_backward(a2_, z2_, adj2, b, channels_);

    g_w2.noalias() += adj2 * a1_.transpose();
    g_b2 += adj2.leftCols(b).rowwise().sum();

    MatrixXd adj1 = params.w2().transpose() * adj2;
    // z1 channels: value needed only through t; d1 = W1(:,0); d2 = 0.
    {
        const auto t = a1_.leftCols(b).array();
        const ArrayXXd t1 = 1.0 - t.square();
        if (jets) {
            const ArrayXXd t2 = -2.0 * t * t1;
            const ArrayXXd t3 = -2.0 * t1.square() - 2.0 * t * t2;
            const Eigen::ArrayXd w10 =
                params.w1().col(0).array() * (1.0 / InputScaling::kMoneynessScale);
            const ArrayXXd x1 = w10.replicate(1, b);
            const ArrayXXd yv = adj1.leftCols(b).array();
            const ArrayXXd y1 = adj1.middleCols(b, b).array();
            const ArrayXXd y2 = adj1.rightCols(b).array();
            adj1.leftCols(b).array() = yv * t1 + y1 * t2 * x1 + y2 * t3 * x1.square();
            adj1.middleCols(b, b).array() = y1 * t1 + 2.0 * y2 * t2 * x1;
        } else {
            adj1.leftCols(b).array() *= t1;
        }
    }
    const auto adj1_v = adj1.leftCols(b);
    g_w1.head(H).noalias() += adj1_v * m_.transpose();
    g_w1.tail(H).noalias() += adj1_v * tau_.transpose();
    if (jets) {
        g_w1.head(H) +=
            adj1.middleCols(b, b).rowwise().sum() * (1.0 / InputScaling::kMoneynessScale);
    }
    g_b1 += adj1_v.rowwise().sum();
}

}  // namespace finn
