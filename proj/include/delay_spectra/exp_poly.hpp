#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "delay_spectra/dual.hpp"

namespace delay_spectra {

/// One term c * t^k * exp(-d*t) of the closed-form function family used for
/// kernel densities, time-varying perturbation matrices and gamma envelopes.
struct ExpPolyTerm {
    double c = 0.0;
    int k = 0;
    double d = 0.0;

    double eval(double t) const {
        double p = c;
        for (int j = 0; j < k; ++j) p *= t;
        return p * std::exp(-d * t);
    }
};

inline double eval_exp_poly(const std::vector<ExpPolyTerm>& terms, double t) {
    double s = 0.0;
    for (const auto& term : terms) s += term.eval(t);
    return s;
}

namespace detail {

inline double factorial(int k) {
    double f = 1.0;
    for (int j = 2; j <= k; ++j) f *= j;
    return f;
}

template <class S>
S pow_int(S base, int k) {
    S r = S(1.0);
    for (int j = 0; j < k; ++j) r *= base;
    return r;
}

}  // namespace detail

/// Integral of t^k * exp(-a*t) over [0, T], templated so the decay argument
/// may be real, complex, or a dual number.
///
/// Small |a*T| uses the Taylor series sum_j (-a)^j T^(k+j+1) / (j! (k+j+1));
/// otherwise the complete integral k!/a^(k+1) minus the closed-form tail
/// exp(-aT) * sum_{j<=k} (k!/(k-j)!) T^(k-j) / a^(j+1), which avoids the
/// cancellation the naive upward recursion hits for large a*T.
template <class S>
S incomplete_exp_integral(int k, const S& a, double T) {
    if (T == 0.0) return S(0.0);
    if (abs_value(a) * T < 0.7) {
        S sum = S(0.0);
        S aj = S(1.0);  // (-a)^j / j!
        double Tp = std::pow(T, k + 1);
        for (int j = 0; j < 200; ++j) {
            S term = aj * S(Tp / (k + j + 1));
            sum += term;
            if (abs_value(term) < 1e-18 * (1.0 + abs_value(sum))) break;
            aj *= -a / S(double(j + 1));
            Tp *= T;
        }
        return sum;
    }
    S inv_a = S(1.0) / a;
    S full = S(detail::factorial(k)) * detail::pow_int(inv_a, k + 1);
    S tail = S(0.0);
    double coeff = 1.0;  // k!/(k-j)!
    double Tp = std::pow(T, k);
    S aj = inv_a;
    for (int j = 0; j <= k; ++j) {
        tail += S(coeff * Tp) * aj;
        coeff *= (k - j);
        if (T != 0.0) Tp /= T;
        aj *= inv_a;
    }
    tail *= exp_scalar(-a * S(T));
    return full - tail;
}

/// Integral of t^k * exp(-a*t) over [T, infinity); requires Re(a) > 0.
inline double exp_integral_tail(int k, double a, double T) {
    double coeff = detail::factorial(k);
    if (T == 0.0) return coeff / std::pow(a, k + 1);
    double sum = 0.0;
    double c = 1.0;  // k!/(k-j)!
    double Tp = std::pow(T, k);
    double aj = 1.0 / a;
    for (int j = 0; j <= k; ++j) {
        sum += c * Tp * aj;
        c *= (k - j);
        Tp /= T;
        aj /= a;
    }
    return std::exp(-a * T) * sum;
}

/// Integral of a single term over [t0, t1] (t1 may be +infinity when d > 0).
inline double exp_poly_term_integral(const ExpPolyTerm& term, double t0, double t1) {
    if (term.c == 0.0 || t0 == t1) return 0.0;
    if (std::isinf(t1)) {
        if (term.d <= 0.0) return std::numeric_limits<double>::infinity();
        return term.c * exp_integral_tail(term.k, term.d, t0);
    }
    double a = term.d;
    double i1 = incomplete_exp_integral<double>(term.k, a, t1);
    double i0 = incomplete_exp_integral<double>(term.k, a, t0);
    // For large a*t0 both incomplete integrals approach k!/a^(k+1); go through
    // the tail representation instead so the difference keeps relative accuracy.
    if (a > 0.0 && a * t0 > 30.0) {
        return term.c * (exp_integral_tail(term.k, a, t0) - exp_integral_tail(term.k, a, t1));
    }
    return term.c * (i1 - i0);
}

inline double exp_poly_integral(const std::vector<ExpPolyTerm>& terms, double t0, double t1) {
    double s = 0.0;
    for (const auto& term : terms) s += exp_poly_term_integral(term, t0, t1);
    return s;
}

/// Integral over [t, t+1] of s^m/denom * exp(b*s) * gamma(s) for the window
/// checks, written with the window shift factored out:
///   int_t^{t+1} s^m e^{-a s} ds = e^{-a t} sum_j C(m,j) t^(m-j) I_j(a, 1).
inline double window_weighted_integral(const std::vector<ExpPolyTerm>& gamma, int m,
                                       double denom, double b, double t) {
    double total = 0.0;
    for (const auto& term : gamma) {
        if (term.c == 0.0) continue;
        int mm = m + term.k;
        double a = term.d - b;
        double sum = 0.0;
        double binom = 1.0;
        double tp = std::pow(t, mm);
        for (int j = 0; j <= mm; ++j) {
            sum += binom * tp * incomplete_exp_integral<double>(j, a, 1.0);
            binom *= double(mm - j) / double(j + 1);
            if (t != 0.0) tp /= t;
            else tp = (j + 1 == mm) ? 1.0 : 0.0;  // t = 0: only the j = mm term survives
        }
        total += term.c / denom * std::exp(-a * t) * sum;
    }
    return total;
}

}  // namespace delay_spectra
