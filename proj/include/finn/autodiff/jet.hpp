#pragma once

#include <cmath>
#include <string>

#include "finn/error.hpp"

namespace finn::ad {

/// Second-order Taylor coefficients of a quantity with respect to a single
/// seed variable s: (value, d/ds, d^2/ds^2).
struct Jet2 {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;

    friend bool operator==(const Jet2&, const Jet2&) = default;
};

/// Value and first three derivatives of an elementary function at a point.
/// The third derivative is only needed when sweeping adjoints backwards
/// through a jet (the d2 channel depends on f'').
struct Taylor3 {
    double f = 0.0;
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
};

inline void require_finite(double x, const char* op) {
    if (!std::isfinite(x)) {
        throw DomainError(std::string(op) + ": non-finite input");
    }
}

inline Jet2 lift_const(double c) {
    require_finite(c, "lift_const");
    return {c, 0.0, 0.0};
}

inline Jet2 lift_seed(double s) {
    require_finite(s, "lift_seed");
    return {s, 1.0, 0.0};
}

/// Chain rule for y = f(x) truncated at second order.
inline Jet2 compose(const Taylor3& t, const Jet2& x) {
    return {t.f, t.f1 * x.d1, t.f2 * x.d1 * x.d1 + t.f1 * x.d2};
}

inline Taylor3 tanh_taylor(double x) {
    const double t = std::tanh(x);
    const double t1 = 1.0 - t * t;
    const double t2 = -2.0 * t * t1;
    const double t3 = -2.0 * t1 * t1 - 2.0 * t * t2;
    return {t, t1, t2, t3};
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Taylor3 softplus_taylor(double x) {
    const double s = sigmoid(x);
    const double s1 = s * (1.0 - s);
    return {softplus(x), s, s1, s1 * (1.0 - 2.0 * s)};
}

inline Taylor3 exp_taylor(double x) {
    const double e = std::exp(x);
    return {e, e, e, e};
}

inline Taylor3 log_taylor(double x) {
    if (!(x > 0.0)) {
        throw DomainError("ln: argument value must be > 0, got " + std::to_string(x));
    }
    const double inv = 1.0 / x;
    return {std::log(x), inv, -inv * inv, 2.0 * inv * inv * inv};
}

inline Taylor3 recip_taylor(double x) {
    if (x == 0.0) {
        throw DomainError("div: division by a jet with value 0");
    }
    const double inv = 1.0 / x;
    return {inv, -inv * inv, 2.0 * inv * inv * inv, -6.0 * inv * inv * inv * inv};
}

// Clamp at zero. The kink at 0 takes derivative 0 on every channel.
inline Taylor3 max0_taylor(double x) {
    return x > 0.0 ? Taylor3{x, 1.0, 0.0, 0.0} : Taylor3{0.0, 0.0, 0.0, 0.0};
}

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
    return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}
inline Jet2 operator-(const Jet2& a, const Jet2& b) {
    return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}
inline Jet2 operator-(const Jet2& a) { return {-a.value, -a.d1, -a.d2}; }

// Leibniz: (fg)'' = f''g + 2f'g' + fg''
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2};
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
    return a * compose(recip_taylor(b.value), b);
}

inline Jet2 operator+(const Jet2& a, double c) { return {a.value + c, a.d1, a.d2}; }
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return {a.value - c, a.d1, a.d2}; }
inline Jet2 operator-(double c, const Jet2& a) { return {c - a.value, -a.d1, -a.d2}; }
inline Jet2 operator*(const Jet2& a, double c) { return {a.value * c, a.d1 * c, a.d2 * c}; }
inline Jet2 operator*(double c, const Jet2& a) { return a * c; }

inline Jet2 add(const Jet2& a, const Jet2& b) { return a + b; }
inline Jet2 sub(const Jet2& a, const Jet2& b) { return a - b; }
inline Jet2 mul(const Jet2& a, const Jet2& b) { return a * b; }
inline Jet2 div(const Jet2& a, const Jet2& b) { return a / b; }

inline Jet2 exp(const Jet2& x) { return compose(exp_taylor(x.value), x); }
inline Jet2 ln(const Jet2& x) { return compose(log_taylor(x.value), x); }
inline Jet2 tanh(const Jet2& x) { return compose(tanh_taylor(x.value), x); }
inline Jet2 softplus(const Jet2& x) { return compose(softplus_taylor(x.value), x); }
inline Jet2 max0(const Jet2& x) { return compose(max0_taylor(x.value), x); }

}  // namespace finn::ad
