#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "finn/autodiff/jet.hpp"

namespace finn::ad {

class Tape;

/// Handle to a jet-valued node recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    const Jet2& jet() const;
    double value() const { return jet().value; }
    std::uint32_t index() const { return index_; }
    Tape* tape() const { return tape_; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

enum class OpCode : std::uint8_t {
    constant,
    seed,
    parameter,
    add,
    sub,
    mul,
    neg,
    exp,
    ln,
    tanh,
    softplus,
    max0,
    recip,
    channel_d1,  // (x.d1, 0, 0)
    channel_d2,  // (x.d2, 0, 0)
};

/// Records jet-valued operations so that gradients of a scalar (the value
/// channel of a loss node) can be swept back to every registered parameter.
/// Because each node carries (value, d1, d2), adjoints are carried per
/// channel and flow correctly through losses built from d1/d2 channels.
///
/// Nodes are appended in evaluation order, so node indices are already a
/// topological order. A tape is single-threaded.
class Tape {
public:
    struct Node {
        OpCode op;
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        Jet2 jet;
    };

    Var constant(double c);
    Var seed(double s);
    /// Registers a new parameter; parameters are numbered in call order.
    Var parameter(double value);

    Var record_binary(OpCode op, Var a, Var b);
    Var record_unary(OpCode op, Var a);

    std::size_t size() const { return nodes_.size(); }
    std::size_t parameter_count() const { return parameter_nodes_.size(); }
    const Node& node(std::uint32_t i) const { return nodes_[i]; }
    std::span<const std::uint32_t> parameter_nodes() const { return parameter_nodes_; }

    /// d(loss.value)/d(theta_i) for every registered parameter.
    /// Throws NumericError naming the first non-finite node when the loss
    /// is not finite.
    std::vector<double> grad_params(Var loss) const;

    /// Order in which grad_params visits nodes (strictly decreasing indices,
    /// starting at the loss node).
    std::vector<std::uint32_t> sweep_order(Var loss) const;

    /// Recomputes every node with new parameter values (same registration
    /// order). Replaying with the recorded values is bit-identical.
    void replay(std::span<const double> params);

    std::vector<double> parameter_values() const;

private:
    Jet2 evaluate(const Node& n) const;

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> parameter_nodes_;
};

inline const Jet2& Var::jet() const { return tape_->node(index_).jet; }

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);

Var exp(Var x);
Var ln(Var x);
Var tanh(Var x);
Var softplus(Var x);
Var max0(Var x);
Var d1_of(Var x);
Var d2_of(Var x);

}  // namespace finn::ad
