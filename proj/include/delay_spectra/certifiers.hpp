#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delay_spectra/system.hpp"

namespace delay_spectra {

/// Matrix measure kappa_2(A): largest eigenvalue of (A + A*)/2. Upper-bounds
/// every eigenvalue real part.
double matrix_measure(const MatrixXcd& a);
double matrix_measure(const MatrixXd& a);

struct SweepResult {
    double sup = 0.0;
    double omega_star = 0.0;
    bool at_boundary = false;      // sup attained at omega_max: widen the grid
    bool pole_detected = false;    // imaginary-axis pole
    double omega_max = 0.0;
    int grid_points = 0;
    double refinement_tol = 0.0;
};

/// sup over [0, omega_max] of the largest singular value of a matrix-valued
/// transfer function on the imaginary axis: 1024-point log-linear grid, then
/// golden-section refinement around the top 3 local maxima.
SweepResult hinf_sweep(const std::function<MatrixXcd(double)>& transfer, double omega_max,
                       double refinement_tol = 1e-6);

enum class TestId {
    thm41_i_eq42,
    thm41_i_eq43,
    thm41_ii,
    remark43,
    thm44_i,
    thm44_ii,
    thm44_iii,
};

const char* test_id_name(TestId id);

struct SubVerdict {
    TestId id;
    bool certified = false;
    double gain = 0.0;
    double resolvent_sup = 0.0;
    double margin = 0.0;  // 1 - gain * sup when certified through a small-gain product
    double shift_margin = 0.0;  // largest admissible axis shift rho (bisection)
    std::string reason;
    SweepResult sweep;
};

/// Outcome of a stability test with every intermediate quantity recorded.
/// "not certified" does not mean unstable.
struct Certificate {
    TestId test_id;
    bool certified = false;
    std::vector<double> betas;
    SweepResult sweep;
    std::map<std::string, double> values;  // named norms / measures / bounds
    std::optional<double> abscissa_bound;  // <= 0 when present
    std::vector<SubVerdict> subs;          // per-rearrangement results (mixed test)
    std::string notes;
};

/// Default beta_i = 1/sqrt(m); a supplied vector is validated against
/// sum beta_i^2 = 1.
std::vector<double> default_betas(int m);

/// Point-delay delay-independent certificate: A_0 Hurwitz and either the
/// frequency-sweep condition sup_w sv((iwI - sum A_i)^(-1) [b1^-1 A_1 ...]) < 1
/// or the measure condition ||[b1^-1 A_1 ...]|| < -kappa_2(A_0).
Certificate certify_point_delay_independent(const ValidatedSystem& system,
                                            const std::vector<double>& betas = {});

/// Abscissa bound from the shifted resolvent: rho_01 = 1/||A_0^-1||,
/// rho_02 = 1/||(sI - sum A_i)^-1||_inf, and the measure route
/// rho_meas = -kappa_2(A_0) - ||block||. Requires the point-delay certificate.
Certificate abscissa_bound(const ValidatedSystem& system, const std::vector<double>& betas = {});

/// Alternative point-delay certificate from the A_0-resolvent gain a0:
/// certified iff a0 < 1 and ||[b1^-1 A_1 ...]|| < 1/a0.
Certificate certify_remark43(const ValidatedSystem& system);

/// Small-gain certificate for one point delay + one finite kernel, three
/// rearrangements tried independently; verdict is their disjunction. Records
/// per-test shift margins as abscissa bound.
Certificate certify_mixed(const ValidatedSystem& system);

}  // namespace delay_spectra
