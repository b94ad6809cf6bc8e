#pragma once

#include <string>
#include <vector>

#include "delay_spectra/spectrum.hpp"
#include "delay_spectra/system.hpp"
#include "delay_spectra/trajectory.hpp"

namespace delay_spectra {

/// Least-squares fit of log|x_t| against {t, log t, 1} on a tail window.
struct ExponentFit {
    double mu_hat = 0.0;     // coefficient of t
    double nu_hat = 1.0;     // 1 + coefficient of log t, clamped >= 1
    double logt_coef = 0.0;  // raw log t coefficient (before the clamp)
    // A strong oscillation with fewer than ~3 periods inside the window makes
    // the slope poorly identified even after smoothing.
    bool oscillation_warning = false;
    double t1 = 0.0, t2 = 0.0;
    double r2 = 0.0;
    double se_mu = 0.0;    // standard error of mu_hat
    double se_resid = 0.0; // residual standard error
    Norm norm = Norm::l2;
    int n_points = 0;
};

ExponentFit estimate_exponent(const Trajectory& traj, double h, double window_frac = 0.5,
                              Norm norm = Norm::l2);

enum class GammaClass { exp_decay_a, integrable_b, little_o_power_c, bounded_only };
const char* gamma_class_name(GammaClass g);

struct GammaClassification {
    GammaClass cls = GammaClass::bounded_only;
    double a = 0.0;  // decay rate when cls == exp_decay_a
};

/// Symbolic classification of the envelope gamma for the corollary map:
/// (a) gamma = o(e^{-at}); (b) int t^{nu-1} gamma < inf; (c) gamma <= o(t^{1-nu}).
GammaClassification classify_gamma(const PerturbationSpec& pert, int nu);

enum class ComparisonClass { small_o_exp, small_o_mu, big_O_c };
const char* comparison_class_name(ComparisonClass c);

/// Asymptotic comparison of a perturbed solution against the fitted dominant
/// eigensolution of the limiting equation.
struct ComparisonReport {
    double mu = 0.0;
    Complex c_hat;            // fitted amplitude of the dominant eigensolution
    double residual_rate = 0.0;
    double epsilon_hat = 0.0;  // mu - residual_rate
    ComparisonClass classification = ComparisonClass::big_O_c;
    GammaClass gamma_class = GammaClass::bounded_only;
    bool mu_not_characteristic = false;  // K0 > 0 stable branch
    bool residual_below_floor = false;   // x - y at the numeric floor
    std::string verdict;                 // consistent / inconsistent / inconclusive
    ExponentFit residual_fit;
    double fit_r2 = 0.0;       // r^2 of the eigensolution amplitude fit
    double solution_rate = 0.0;
    std::vector<Complex> basis_roots;
    // Evaluation artifacts for exporters: the perturbed run and the fitted
    // eigensolution y(t).
    std::shared_ptr<const Trajectory> trajectory;
    std::function<VectorXd(double)> fitted_eigensolution;
};

struct CompareOptions {
    double sigma_min = 0.0;   // 0 = auto
    double step = 0.0;        // 0 = auto
    double window_frac = 0.5;
    Norm norm = Norm::l2;
};

ComparisonReport perron_compare(const ValidatedSystem& system, const PerturbationSpec& pert,
                                const HistoryFunction& history, double horizon,
                                const CompareOptions& opts = {});

/// Per-history stability verdicts against the corollary-appropriate behavior.
struct StabilityVerdict {
    struct PerHistory {
        double mu_hat = 0.0;
        double sup_norm = 0.0;
        double history_norm = 0.0;
        bool exponential_ok = true;  // decay at rate <= mu + 0.05 (mu < 0, K0 = 0)
        bool bounded_ok = true;      // uniform boundedness (mu <= 0)
        bool blow_up = false;
        std::string detail;
    };
    double mu = 0.0;
    bool exponential_branch = false;  // Cor 3.4 applicable (mu < 0, K0 = 0)
    bool bounded_branch = false;      // Cor 3.5 applicable (mu <= 0, simple dominants)
    std::vector<PerHistory> histories;
    bool pass = false;
};

StabilityVerdict verify_stability_verdict(const ValidatedSystem& system,
                                          const PerturbationSpec& pert,
                                          const std::vector<HistoryFunction>& histories,
                                          double horizon, const CompareOptions& opts = {});

}  // namespace delay_spectra
