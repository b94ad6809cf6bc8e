#pragma once

#include <optional>
#include <vector>

#include "delay_spectra/system.hpp"
#include "delay_spectra/trajectory.hpp"

namespace delay_spectra {

struct SpectralRootRate {
    double sigma = 0.0;  // real part of a characteristic zero
    int multiplicity = 1;
};

/// Outcome of the window-integral admissibility check on gamma.
struct HypothesisReport {
    struct PerRoot {
        SpectralRootRate root;
        std::vector<double> window_integrals;  // t = 0, 1, ..., T_max-1
        bool eventually_decreasing = false;
        bool tail_below_threshold = false;
        int first_failing_window = -1;
        bool overflow = false;
    };
    std::vector<PerRoot> roots;
    std::vector<double> indicator_averages;  // int_t^{t+1} (gamma - K0)_+ ds
    int beta = 0;                            // 1 iff the system has a Volterra term
    double threshold = 0.0;
    bool pass = false;
};

struct IntegrateOptions {
    Norm envelope_norm = Norm::l2;
    bool check_envelope = true;
    double envelope_slack = 1e-9;  // absolute slack factor: slack * (1 + |x_t|)
    double blowup_threshold = 1e150;
};

/// Integrates the limiting equation on [0, horizon] by the classical 4-stage
/// one-step scheme with cubic dense output. Delayed reads use dense output
/// (history for arguments < 0); distributed terms use composite trapezoid
/// over the stored grid with atom contributions added exactly.
Trajectory integrate_limiting(const ValidatedSystem& system, const HistoryFunction& history,
                              double horizon, double step, const IntegrateOptions& opts = {});

/// Same scheme with f(t, x_t) added; records the realized perturbation norm at
/// every accepted step and throws EnvelopeViolation when the declared
/// (gamma, K0) envelope fails to dominate it.
Trajectory integrate_perturbed(const ValidatedSystem& system, const PerturbationSpec& pert,
                               const HistoryFunction& history, double horizon, double step,
                               const IntegrateOptions& opts = {});

/// Evaluates f(t, x_t) along a solved trajectory.
VectorXd perturbation_value(const PerturbationSpec& pert, const ValidatedSystem& system, double t,
                            const Trajectory& traj);

/// Window integrals int_t^{t+1} s^(m-1)/m! e^(beta sigma s) gamma(s) ds per
/// root rate, evaluated in closed form over the gamma family, plus the
/// indicator-style averages with |f/x| replaced by its envelope.
HypothesisReport hypothesis_check(const PerturbationSpec& pert,
                                  const std::vector<SpectralRootRate>& roots, int beta,
                                  double t_max, double tail_threshold = 1e-6);

}  // namespace delay_spectra
