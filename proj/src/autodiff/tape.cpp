#include "finn/autodiff/tape.hpp"

#include <array>
#include <cmath>
#include <string>

namespace finn::ad {

namespace {

bool is_finite(const Jet2& j) {
    return std::isfinite(j.value) && std::isfinite(j.d1) && std::isfinite(j.d2);
}

Taylor3 unary_taylor(OpCode op, double x) {
    switch (op) {
        case OpCode::exp: return exp_taylor(x);
        case OpCode::ln: return log_taylor(x);
        case OpCode::tanh: return tanh_taylor(x);
        case OpCode::softplus: return softplus_taylor(x);
        case OpCode::max0: return max0_taylor(x);
        case OpCode::recip: return recip_taylor(x);
        default: break;
    }
    throw DomainError("tape: opcode is not an elementary unary function");
}

Tape& common_tape(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
        throw DomainError("tape: operands recorded on different tapes");
    }
    return *a.tape();
}

}  // namespace

Var Tape::constant(double c) {
    nodes_.push_back({OpCode::constant, 0, 0, lift_const(c)});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::seed(double s) {
    nodes_.push_back({OpCode::seed, 0, 0, lift_seed(s)});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(double value) {
    nodes_.push_back({OpCode::parameter, 0, 0, lift_const(value)});
    const auto idx = static_cast<std::uint32_t>(nodes_.size() - 1);
    parameter_nodes_.push_back(idx);
    return {this, idx};
}

Jet2 Tape::evaluate(const Node& n) const {
    const Jet2& a = nodes_[n.a].jet;
    switch (n.op) {
        case OpCode::constant:
        case OpCode::seed:
        case OpCode::parameter:
            return n.jet;
        case OpCode::add: return a + nodes_[n.b].jet;
        case OpCode::sub: return a - nodes_[n.b].jet;
        case OpCode::mul: return a * nodes_[n.b].jet;
        case OpCode::neg: return -a;
        case OpCode::channel_d1: return {a.d1, 0.0, 0.0};
        case OpCode::channel_d2: return {a.d2, 0.0, 0.0};
        default: return compose(unary_taylor(n.op, a.value), a);
    }
}

Var Tape::record_binary(OpCode op, Var a, Var b) {
    Node n{op, a.index(), b.index(), {}};
    n.jet = evaluate(n);
    nodes_.push_back(n);
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record_unary(OpCode op, Var a) {
    Node n{op, a.index(), 0, {}};
    n.jet = evaluate(n);
    nodes_.push_back(n);
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::vector<std::uint32_t> Tape::sweep_order(Var loss) const {
    std::vector<std::uint32_t> order;
    order.reserve(loss.index() + 1);
    for (std::uint32_t i = loss.index() + 1; i-- > 0;) {
        order.push_back(i);
    }
    return order;
}

std::vector<double> Tape::grad_params(Var loss) const {
    if (loss.tape() != this) {
        throw DomainError("grad_params: loss node belongs to another tape");
    }
    if (!std::isfinite(loss.jet().value)) {
        for (std::uint32_t i = 0; i <= loss.index(); ++i) {
            if (!is_finite(nodes_[i].jet)) {
                throw NumericError("grad_params: loss is not finite; first non-finite node is " +
                                   std::to_string(i));
            }
        }
        throw NumericError("grad_params: loss is not finite");
    }

    // Per-node adjoints of the value, d1 and d2 channels.
    std::vector<std::array<double, 3>> adj(loss.index() + 1, {0.0, 0.0, 0.0});
    adj[loss.index()][0] = 1.0;

    for (std::uint32_t i : sweep_order(loss)) {
        const Node& n = nodes_[i];
        const auto [yv, y1, y2] = adj[i];
        if (yv == 0.0 && y1 == 0.0 && y2 == 0.0) {
            continue;
        }
        switch (n.op) {
            case OpCode::constant:
            case OpCode::seed:
            case OpCode::parameter:
                break;
            case OpCode::add:
            case OpCode::sub: {
                const double sign = n.op == OpCode::add ? 1.0 : -1.0;
                auto& a = adj[n.a];
                auto& b = adj[n.b];
                a[0] += yv; a[1] += y1; a[2] += y2;
                b[0] += sign * yv; b[1] += sign * y1; b[2] += sign * y2;
                break;
            }
            case OpCode::neg: {
                auto& a = adj[n.a];
                a[0] -= yv; a[1] -= y1; a[2] -= y2;
                break;
            }
            case OpCode::mul: {
                const Jet2& x = nodes_[n.a].jet;
                const Jet2& z = nodes_[n.b].jet;
                // Accumulate into locals first: a and b may be the same node.
                const double av = yv * z.value + y1 * z.d1 + y2 * z.d2;
                const double a1 = y1 * z.value + 2.0 * y2 * z.d1;
                const double a2 = y2 * z.value;
                const double bv = yv * x.value + y1 * x.d1 + y2 * x.d2;
                const double b1 = y1 * x.value + 2.0 * y2 * x.d1;
                const double b2 = y2 * x.value;
                auto& a = adj[n.a];
                a[0] += av; a[1] += a1; a[2] += a2;
                auto& b = adj[n.b];
                b[0] += bv; b[1] += b1; b[2] += b2;
                break;
            }
            case OpCode::channel_d1:
                adj[n.a][1] += yv;
                break;
            case OpCode::channel_d2:
                adj[n.a][2] += yv;
                break;
            default: {
                const Jet2& x = nodes_[n.a].jet;
                const Taylor3 t = unary_taylor(n.op, x.value);
                auto& a = adj[n.a];
                a[0] += yv * t.f1 + y1 * t.f2 * x.d1 + y2 * (t.f3 * x.d1 * x.d1 + t.f2 * x.d2);
                a[1] += y1 * t.f1 + 2.0 * y2 * t.f2 * x.d1;
                a[2] += y2 * t.f1;
                break;
            }
        }
    }

    std::vector<double> grad(parameter_nodes_.size(), 0.0);
    for (std::size_t p = 0; p < parameter_nodes_.size(); ++p) {
        const std::uint32_t idx = parameter_nodes_[p];
        if (idx <= loss.index()) {
            grad[p] = adj[idx][0];
        }
    }
    return grad;
}

void Tape::replay(std::span<const double> params) {
    if (params.size() != parameter_nodes_.size()) {
        throw DomainError("replay: expected " + std::to_string(parameter_nodes_.size()) +
                          " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        nodes_[parameter_nodes_[p]].jet = lift_const(params[p]);
    }
    for (auto& n : nodes_) {
        n.jet = evaluate(n);
    }
}

std::vector<double> Tape::parameter_values() const {
    std::vector<double> out;
    out.reserve(parameter_nodes_.size());
    for (auto idx : parameter_nodes_) {
        out.push_back(nodes_[idx].jet.value);
    }
    return out;
}

Var operator+(Var a, Var b) { return common_tape(a, b).record_binary(OpCode::add, a, b); }
Var operator-(Var a, Var b) { return common_tape(a, b).record_binary(OpCode::sub, a, b); }
Var operator*(Var a, Var b) { return common_tape(a, b).record_binary(OpCode::mul, a, b); }
Var operator/(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record_binary(OpCode::mul, a, t.record_unary(OpCode::recip, b));
}
Var operator-(Var a) { return a.tape()->record_unary(OpCode::neg, a); }
Var operator+(Var a, double c) { return a + a.tape()->constant(c); }
Var operator+(double c, Var a) { return a.tape()->constant(c) + a; }
Var operator-(Var a, double c) { return a - a.tape()->constant(c); }
Var operator-(double c, Var a) { return a.tape()->constant(c) - a; }
Var operator*(Var a, double c) { return a * a.tape()->constant(c); }
Var operator*(double c, Var a) { return a.tape()->constant(c) * a; }

Var exp(Var x) { return x.tape()->record_unary(OpCode::exp, x); }
Var ln(Var x) { return x.tape()->record_unary(OpCode::ln, x); }
Var tanh(Var x) { return x.tape()->record_unary(OpCode::tanh, x); }
Var softplus(Var x) { return x.tape()->record_unary(OpCode::softplus, x); }
Var max0(Var x) { return x.tape()->record_unary(OpCode::max0, x); }
Var d1_of(Var x) { return x.tape()->record_unary(OpCode::channel_d1, x); }
Var d2_of(Var x) { return x.tape()->record_unary(OpCode::channel_d2, x); }

}  // namespace finn::ad
