#pragma once

#include <utility>
#include <vector>

#include "delay_spectra/system.hpp"

namespace delay_spectra {

struct Rect {
    double re_min = 0.0, re_max = 0.0;
    double im_min = 0.0, im_max = 0.0;
    double width() const { return re_max - re_min; }
    double height() const { return im_max - im_min; }
    bool contains(Complex s, double margin = 0.0) const {
        return s.real() >= re_min - margin && s.real() <= re_max + margin &&
               s.imag() >= im_min - margin && s.imag() <= im_max + margin;
    }
};

struct CharacteristicRoot {
    Complex lambda;
    int multiplicity = 1;
    double residual = 0.0;  // |det D(lambda)| at convergence
    Rect enclosure;
    bool newton_converged = true;
};

struct RootSet {
    std::vector<CharacteristicRoot> roots;
    Rect region;        // searched region (after any pole clamp / edge nudges)
    double abscissa = 0.0;
    bool exhaustive = false;  // argument-principle count matched sum of multiplicities
    int contour_count = 0;
};

struct LambdaSets {
    double mu = 0.0;
    std::vector<CharacteristicRoot> lambda0, lambda1, lambda_all;
};

struct Eigensolution {
    Complex lambda;
    VectorXcd v;       // D(lambda) v = 0, ||v|| = 1, first nonzero entry positive-real
    double residual = 0.0;
};

struct AbscissaResult {
    double mu = 0.0;
    std::vector<CharacteristicRoot> dominant;
    RootSet all;
};

/// Characteristic matrix D(s) whose inverse is the resolvent:
///   D(s) = s(I - sum_{i<=m'} a^_i(s) A_ai e^(-h'_i s)
///            - sum_{i>m'} a^_i(s) A_ai (1 - e^(-h'_i s)))
///        - sum_i A_i e^(-h_i s) + alpha(0) A_a
///        + sum_{i<=m'} alpha_i(0) A_ai e^(-h'_i s)
///        + sum_{i>m'} alpha_i(0) A_ai (1 - e^(-h'_i s)).
/// Assembled through s a^_i(s) = da^_i(s) + alpha_i(0), so s = 0 is regular;
/// with no distributed terms it reduces to sI - sum A_i e^(-h_i s).
MatrixXcd characteristic_matrix(const ValidatedSystem& system, Complex s);

/// det D(s) and d/ds det D(s), both from one LU pass over dual numbers
/// (exact derivative of the analytic closed form).
std::pair<Complex, Complex> characteristic_det(const ValidatedSystem& system, Complex s);

/// Argument-principle root search: adaptive phase-tracked winding numbers on
/// rectangle boundaries, recursive subdivision, Newton refinement of isolated
/// roots. Multiple roots are reported once with the winding count as
/// multiplicity when the box reaches minimum size.
RootSet find_roots(const ValidatedSystem& system, Rect region, double root_tol = 1e-10);

/// Norm bound sum ||A_i|| + sum TV(alpha_i) ||A_ai|| limiting the real part of
/// any root in the closed right half-plane.
double sigma_cap(const ValidatedSystem& system);

/// Default sweep band 10 (1 + sum ||A_i|| + sum TV ||A_ai||).
double default_omega_max(const ValidatedSystem& system);

/// Rightmost roots over [sigma_min, sigma_cap] x [0, omega_max]. For systems
/// with Volterra densities the left edge is clamped right of the transform
/// poles. omega_max <= 0 selects the default band.
AbscissaResult spectral_abscissa(const ValidatedSystem& system, double sigma_min,
                                 double omega_max = 0.0, double root_tol = 1e-10);

/// Partition by real part against mu: Lambda0 = {|Re l - mu| <= tie_tol},
/// Lambda1 = {Re l > mu + tie_tol}.
LambdaSets lambda_sets(const RootSet& roots, double mu, double tie_tol = 1e-7);

/// Right null direction of D(lambda) for a simple root (smallest singular
/// direction). Throws for multiplicity > 1 or a numerically 2-dim null space.
Eigensolution eigensolution(const ValidatedSystem& system, const CharacteristicRoot& root);

}  // namespace delay_spectra
