#pragma once

#include <cmath>
#include <complex>

namespace delay_spectra {

/// First-order dual number over std::complex<double>.
///
/// Evaluating an analytic expression at CDual::variable(s) carries the exact
/// derivative alongside the value, so d/ds det D(s) comes out of one LU pass
/// with no truncation error.
struct CDual {
    std::complex<double> v{0.0, 0.0};  // value
    std::complex<double> d{0.0, 0.0};  // derivative w.r.t. the seed variable

    CDual() = default;
    CDual(std::complex<double> value) : v(value) {}  // NOLINT: implicit constant lift
    CDual(double value) : v(value) {}                // NOLINT
    CDual(std::complex<double> value, std::complex<double> deriv) : v(value), d(deriv) {}

    static CDual variable(std::complex<double> s) { return {s, {1.0, 0.0}}; }

    CDual operator-() const { return {-v, -d}; }

    CDual& operator+=(const CDual& o) { v += o.v; d += o.d; return *this; }
    CDual& operator-=(const CDual& o) { v -= o.v; d -= o.d; return *this; }
    CDual& operator*=(const CDual& o) {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
    CDual& operator/=(const CDual& o) {
        d = (d * o.v - v * o.d) / (o.v * o.v);
        v /= o.v;
        return *this;
    }
};

inline CDual operator+(CDual a, const CDual& b) { return a += b; }
inline CDual operator-(CDual a, const CDual& b) { return a -= b; }
inline CDual operator*(CDual a, const CDual& b) { return a *= b; }
inline CDual operator/(CDual a, const CDual& b) { return a /= b; }

inline bool operator==(const CDual& a, const CDual& b) { return a.v == b.v && a.d == b.d; }

inline CDual exp(const CDual& a) {
    std::complex<double> e = std::exp(a.v);
    return {e, e * a.d};
}

/// Magnitude of the value part; used for pivoting and convergence tests.
inline double abs_value(const CDual& a) { return std::abs(a.v); }
inline double abs_value(const std::complex<double>& a) { return std::abs(a); }
inline double abs_value(double a) { return std::abs(a); }

inline CDual exp_scalar(const CDual& a) { return exp(a); }
inline std::complex<double> exp_scalar(const std::complex<double>& a) { return std::exp(a); }
inline double exp_scalar(double a) { return std::exp(a); }

}  // namespace delay_spectra
