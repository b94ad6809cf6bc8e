#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "delay_spectra/common.hpp"
#include "delay_spectra/history.hpp"

namespace delay_spectra {

/// Dense numerical solution on [t0, horizon] with cubic Hermite interpolation
/// between grid points and history access for t < t0. Immutable once built.
class Trajectory {
public:
    enum class Interp { cubic_hermite };

    Trajectory() = default;
    Trajectory(double t0, double step, std::vector<double> times, std::vector<VectorXd> samples,
               std::vector<VectorXd> derivatives, std::shared_ptr<const HistoryFunction> history,
               double max_delay);

    /// Tabulates an arbitrary function as a trajectory (synthetic data for
    /// fits and tests). Derivatives by central differences.
    static Trajectory tabulate(const std::function<VectorXd(double)>& fn, double t0,
                               double horizon, double step,
                               std::shared_ptr<const HistoryFunction> history = nullptr,
                               double max_delay = 0.0);

    VectorXd eval(double t) const;
    double t0() const { return t0_; }
    double horizon() const { return times_.empty() ? t0_ : times_.back(); }
    double step() const { return step_; }
    int dim() const { return samples_.empty() ? 0 : static_cast<int>(samples_.front().size()); }
    double max_delay() const { return max_delay_; }
    Interp interpolation() const { return Interp::cubic_hermite; }

    const std::vector<double>& times() const { return times_; }
    const std::vector<VectorXd>& samples() const { return samples_; }
    const std::vector<VectorXd>& derivatives() const { return derivs_; }
    const HistoryFunction* history() const { return history_.get(); }

    /// Realized |f(t, x_t)| at each accepted step of a perturbed run
    /// (empty for limiting runs).
    const std::vector<double>& realized_perturbation_norms() const { return realized_f_; }
    void set_realized_perturbation_norms(std::vector<double> v) { realized_f_ = std::move(v); }

private:
    double t0_ = 0.0;
    double step_ = 0.0;
    std::vector<double> times_;
    std::vector<VectorXd> samples_;
    std::vector<VectorXd> derivs_;
    std::shared_ptr<const HistoryFunction> history_;
    double max_delay_ = 0.0;
    std::vector<double> realized_f_;
};

/// sup over a dense sampling of [t-h, t] (resolution <= step/2, breakpoints
/// included) of the chosen vector norm. History is consulted for arguments
/// below t0.
double string_norm(const Trajectory& traj, double t, double h, Norm norm = Norm::l2);

}  // namespace delay_spectra
