#pragma once

#include <limits>
#include <string>
#include <vector>

#include "delay_spectra/common.hpp"
#include "delay_spectra/exp_poly.hpp"

namespace delay_spectra {

enum class KernelKind { volterra, finite };

/// Jump discontinuity of alpha at tau with weight w.
struct KernelAtom {
    double tau = 0.0;
    double w = 0.0;
};

/// Scalar bounded-variation kernel alpha with density alpha'(t) given by a
/// polynomial-times-exponential expansion plus finitely many atoms.
///
/// Volterra kernels act on [0, inf) (every density decay rate must be > 0 so
/// exponentially weighted total variation is finite); finite kernels act on
/// [0, support_bound]. Matrix-valued kernels are expressed as several
/// (matrix, scalar kernel) pairs sharing an atom grid.
struct KernelSpec {
    KernelKind kind = KernelKind::volterra;
    std::vector<ExpPolyTerm> density;
    std::vector<KernelAtom> atoms;
    double support_bound = 0.0;   // = h'_i for finite kernels; unused for Volterra
    double alpha_at_zero = 0.0;   // alpha(0)

    std::vector<std::string> validate() const;

    /// Smallest density decay rate (+inf when there is no density).
    double min_decay() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& t : density)
            if (t.c != 0.0 && t.d < m) m = t.d;
        return m;
    }

    /// Term-wise total variation bound: sum |w_j| + sum |c| k!/d^(k+1)
    /// (exact when every density term keeps one sign on the support).
    double total_variation() const;

    /// Laplace transform of the measure d(alpha):
    /// atoms contribute w * exp(-s tau), density terms c k!/(s+d)^(k+1)
    /// (truncated at support_bound for finite kernels). Throws KernelPoleError
    /// at a density pole s = -d of a Volterra kernel.
    template <class S>
    S transform_dalpha(S s) const;

    /// Laplace transform of alpha itself: (transform of d(alpha) + alpha(0)) / s.
    /// Throws SingularPointError at s = 0.
    Complex transform_alpha(Complex s) const;

    /// Stieltjes measure of [a, b): atoms with tau in [a, b) plus the density
    /// integral over [a, b]. b may be +infinity for Volterra kernels.
    double measure(double a, double b) const;

    /// Measure of the whole support including an atom sitting exactly at the
    /// right end of a finite kernel's support.
    double full_mass() const;
};

template <class S>
S KernelSpec::transform_dalpha(S s) const {
    S acc = S(0.0);
    for (const auto& atom : atoms) acc += S(atom.w) * exp_scalar(-s * S(atom.tau));
    for (const auto& term : density) {
        if (term.c == 0.0) continue;
        S shifted = s + S(term.d);
        if (kind == KernelKind::volterra) {
            if (abs_value(shifted) < 1e-12 * (1.0 + abs_value(s)))
                throw KernelPoleError(Complex(-term.d, 0.0));
            S inv = S(1.0) / shifted;
            acc += S(term.c * detail::factorial(term.k)) * detail::pow_int(inv, term.k + 1);
        } else {
            acc += S(term.c) * incomplete_exp_integral<S>(term.k, shifted, support_bound);
        }
    }
    return acc;
}

}  // namespace delay_spectra
