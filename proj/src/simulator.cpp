#include "delay_spectra/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace delay_spectra {

namespace {

/// Incrementally built solution with the same lookup rules as Trajectory,
/// plus provisional access to the current Runge-Kutta stage.
class SolutionBuffer {
public:
    SolutionBuffer(const HistoryFunction& history, double step)
        : history_(history), step_(step) {}

    void push(double t, VectorXd x, VectorXd f) {
        times_.push_back(t);
        xs_.push_back(std::move(x));
        fs_.push_back(std::move(f));
    }

    void set_stage(double t, const VectorXd* x) {
        stage_t_ = t;
        stage_x_ = x;
    }

    double accepted_time() const { return times_.empty() ? 0.0 : times_.back(); }
    size_t size() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<VectorXd>& xs() const { return xs_; }
    const std::vector<VectorXd>& fs() const { return fs_; }

    VectorXd read(double s) const {
        if (s <= 0.0) {
            if (s == 0.0 && !xs_.empty()) return xs_.front();
            return history_.eval(s);
        }
        double ta = accepted_time();
        if (s <= ta + 1e-12 * (1.0 + ta)) return interp(std::min(s, ta));
        if (stage_x_ != nullptr && s <= stage_t_ + 1e-12 * (1.0 + stage_t_)) {
            if (stage_t_ <= ta) return *stage_x_;
            double u = std::clamp((s - ta) / (stage_t_ - ta), 0.0, 1.0);
            return (1.0 - u) * xs_.back() + u * (*stage_x_);
        }
        throw std::logic_error("read ahead of the solved front");
    }

    /// Sup of the chosen norm over [t-h, t] at resolution <= step/2.
    double string_sup(double t, double h, Norm norm) const {
        double lo = std::max(t - h, -history_.h());
        double best = vec_norm(read(std::min(t, accepted_time())), norm);
        if (h <= 0.0) return best;
        double res = std::min(step_ / 2.0, h / 8.0);
        int steps = std::max(1, static_cast<int>(std::ceil((t - lo) / res)));
        for (int i = 0; i <= steps; ++i) {
            double s = lo + (t - lo) * i / steps;
            best = std::max(best, vec_norm(read(std::min(s, t)), norm));
        }
        for (double b : history_.breakpoints())
            if (b >= lo && b <= t) best = std::max(best, vec_norm(read(b), norm));
        return best;
    }

private:
    VectorXd interp(double s) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), s);
        size_t j = static_cast<size_t>(std::max<std::ptrdiff_t>(1, it - times_.begin()));
        j = std::min(j, times_.size() - 1);
        if (times_.size() == 1) return xs_.front();
        double ta = times_[j - 1], tb = times_[j];
        double dt = tb - ta;
        if (dt <= 0.0) return xs_[j];
        double u = std::clamp((s - ta) / dt, 0.0, 1.0);
        double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * xs_[j - 1] + ((u3 - 2 * u2 + u) * dt) * fs_[j - 1] +
               (-2 * u3 + 3 * u2) * xs_[j] + ((u3 - u2) * dt) * fs_[j];
    }

    const HistoryFunction& history_;
    double step_;
    double stage_t_ = 0.0;
    const VectorXd* stage_x_ = nullptr;
    std::vector<double> times_;
    std::vector<VectorXd> xs_;
    std::vector<VectorXd> fs_;
};

/// Trapezoid nodes for int_0^upper rho(u) X(base - u) du on the stored grid
/// resolution, partial last interval included. Volterra terms re-walk the
/// whole history, O((T/step)^2) over a run.
// TODO: running recurrence for exp-polynomial kernels would make this O(1) per step.
template <class Reader>
VectorXd density_quadrature(const KernelSpec& kernel, double upper, double base, double step,
                            const Reader& read, int n) {
    VectorXd acc = VectorXd::Zero(n);
    if (upper <= 0.0 || kernel.density.empty()) return acc;
    int full = static_cast<int>(std::floor(upper / step + 1e-9));
    double prev_u = 0.0;
    double prev_w = eval_exp_poly(kernel.density, 0.0);
    VectorXd prev_x = read(base);
    for (int j = 1; j <= full + 1; ++j) {
        double u = std::min(j * step, upper);
        if (u <= prev_u + 1e-15) break;
        double w = eval_exp_poly(kernel.density, u);
        VectorXd x = read(base - u);
        acc += 0.5 * (u - prev_u) * (prev_w * prev_x + w * x);
        prev_u = u;
        prev_w = w;
        prev_x = std::move(x);
        if (u >= upper) break;
    }
    return acc;
}

struct Rhs {
    const DelaySystem& sys;
    const PerturbationSpec* pert;  // may be null
    double step;

    /// Nominal right-hand side L x_t at stage time t.
    template <class Reader>
    VectorXd limiting(double t, const Reader& read) const {
        VectorXd dx = VectorXd::Zero(sys.n);
        for (const auto& ptm : sys.point_terms) dx += ptm.A * read(t - ptm.h);
        for (const auto& vt : sys.volterra_terms) {
            VectorXd contrib = density_quadrature(vt.kernel, t, t - vt.shift, step, read, sys.n);
            for (const auto& atom : vt.kernel.atoms)
                if (atom.tau >= 0.0 && atom.tau < t) contrib += atom.w * read(t - atom.tau - vt.shift);
            dx += vt.A * contrib;
        }
        for (const auto& ft : sys.finite_dist_terms) {
            double upper = ft.kernel.support_bound > 0.0 ? ft.kernel.support_bound : ft.span;
            VectorXd contrib = density_quadrature(ft.kernel, upper, t, step, read, sys.n);
            for (const auto& atom : ft.kernel.atoms) contrib += atom.w * read(t - atom.tau);
            dx += ft.A * contrib;
        }
        return dx;
    }

    /// Perturbation f(t, x_t) of Eq-form: time-varying matrices against the
    /// same delayed states and kernels, plus the residual term.
    template <class Reader>
    VectorXd perturbation(double t, const Reader& read) const {
        VectorXd f = VectorXd::Zero(sys.n);
        if (pert == nullptr) return f;
        if (!pert->tilde_point.empty())
            for (size_t i = 0; i < sys.point_terms.size(); ++i) {
                if (pert->tilde_point[i].is_zero()) continue;
                f += pert->tilde_point[i].eval(t) * read(t - sys.point_terms[i].h);
            }
        if (!pert->tilde_volterra.empty())
            for (size_t i = 0; i < sys.volterra_terms.size(); ++i) {
                if (pert->tilde_volterra[i].is_zero()) continue;
                const auto& vt = sys.volterra_terms[i];
                VectorXd contrib = density_quadrature(vt.kernel, t, t - vt.shift, step, read, sys.n);
                for (const auto& atom : vt.kernel.atoms)
                    if (atom.tau >= 0.0 && atom.tau < t)
                        contrib += atom.w * read(t - atom.tau - vt.shift);
                f += pert->tilde_volterra[i].eval(t) * contrib;
            }
        if (!pert->tilde_finite.empty())
            for (size_t i = 0; i < sys.finite_dist_terms.size(); ++i) {
                if (pert->tilde_finite[i].is_zero()) continue;
                const auto& ft = sys.finite_dist_terms[i];
                double upper = ft.kernel.support_bound > 0.0 ? ft.kernel.support_bound : ft.span;
                VectorXd contrib = density_quadrature(ft.kernel, upper, t, step, read, sys.n);
                for (const auto& atom : ft.kernel.atoms) contrib += atom.w * read(t - atom.tau);
                f += pert->tilde_finite[i].eval(t) * contrib;
            }
        if (!pert->f0.is_zero()) f += pert->f0.eval(t, sys.n);
        return f;
    }

    template <class Reader>
    VectorXd operator()(double t, const Reader& read) const {
        VectorXd dx = limiting(t, read);
        if (pert != nullptr) dx += perturbation(t, read);
        return dx;
    }
};

Trajectory integrate(const ValidatedSystem& vsys, const PerturbationSpec* pert,
                     const HistoryFunction& history, double horizon, double step,
                     const IntegrateOptions& opts) {
    const DelaySystem& sys = vsys.system();
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
    if (history.dim() != sys.n) throw std::invalid_argument("history dimension mismatch");
    if (history.h() + 1e-12 < sys.h)
        throw std::invalid_argument("history must cover [-h, 0]");
    double min_delay = std::numeric_limits<double>::infinity();
    for (const auto& ptm : sys.point_terms)
        if (ptm.h > 0.0) min_delay = std::min(min_delay, ptm.h);
    if (std::isfinite(min_delay) && step > min_delay / 4.0 + 1e-12)
        throw std::invalid_argument("step must be <= min positive delay / 4");

    if (pert != nullptr) {
        auto errs = pert->validate_against(vsys);
        if (!errs.empty()) throw std::invalid_argument("invalid perturbation: " + errs.front());
    }

    Rhs rhs{sys, pert, step};
    SolutionBuffer buf(history, step);
    auto reader = [&buf](double s) { return buf.read(s); };

    VectorXd x0 = history.terminal_value();
    buf.set_stage(0.0, &x0);
    VectorXd f0 = rhs(0.0, reader);
    buf.push(0.0, x0, f0);

    std::vector<double> realized;
    const bool perturbed = pert != nullptr;
    if (perturbed) {
        realized.push_back(vec_norm(rhs.perturbation(0.0, reader), opts.envelope_norm));
    }

    auto check_state = [&](const VectorXd& x, double t) {
        if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > opts.blowup_threshold)
            throw SimulationError("solution blow-up at t = " + std::to_string(t), t);
    };
    auto check_envelope = [&](double t) {
        if (!perturbed || !opts.check_envelope) return;
        double realized_norm = realized.back();
        double xt = buf.string_sup(t, sys.h, opts.envelope_norm);
        double bound = pert->gamma_eval(t) * xt + pert->K0 + opts.envelope_slack * (1.0 + xt);
        if (realized_norm > bound) throw EnvelopeViolation(t, realized_norm, bound);
    };
    check_envelope(0.0);

    long nsteps = static_cast<long>(std::ceil(horizon / step - 1e-9));
    for (long i = 0; i < nsteps; ++i) {
        double t = i * step;
        double dt = std::min(step, horizon - t);
        if (dt <= 0.0) break;
        const VectorXd& xn = buf.xs().back();
        const VectorXd& k1 = buf.fs().back();

        VectorXd x2 = xn + (0.5 * dt) * k1;
        buf.set_stage(t + 0.5 * dt, &x2);
        VectorXd k2 = rhs(t + 0.5 * dt, reader);

        VectorXd x3 = xn + (0.5 * dt) * k2;
        buf.set_stage(t + 0.5 * dt, &x3);
        VectorXd k3 = rhs(t + 0.5 * dt, reader);

        VectorXd x4 = xn + dt * k3;
        buf.set_stage(t + dt, &x4);
        VectorXd k4 = rhs(t + dt, reader);

        VectorXd xn1 = xn + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        double tn1 = (i + 1 == nsteps) ? horizon : t + dt;
        check_state(xn1, tn1);

        buf.set_stage(tn1, &xn1);
        VectorXd fn1 = rhs(tn1, reader);
        if (perturbed)
            realized.push_back(vec_norm(rhs.perturbation(tn1, reader), opts.envelope_norm));
        buf.push(tn1, std::move(xn1), std::move(fn1));
        buf.set_stage(tn1, nullptr);
        check_envelope(tn1);
    }

    auto hist_copy = std::make_shared<HistoryFunction>(history);
    Trajectory traj(0.0, step, buf.times(), buf.xs(), buf.fs(), hist_copy, sys.h);
    if (perturbed) traj.set_realized_perturbation_norms(std::move(realized));
    return traj;
}

}  // namespace

Trajectory integrate_limiting(const ValidatedSystem& system, const HistoryFunction& history,
                              double horizon, double step, const IntegrateOptions& opts) {
    return integrate(system, nullptr, history, horizon, step, opts);
}

Trajectory integrate_perturbed(const ValidatedSystem& system, const PerturbationSpec& pert,
                               const HistoryFunction& history, double horizon, double step,
                               const IntegrateOptions& opts) {
    return integrate(system, &pert, history, horizon, step, opts);
}

VectorXd perturbation_value(const PerturbationSpec& pert, const ValidatedSystem& system, double t,
                            const Trajectory& traj) {
    if (t < traj.t0() - 1e-12 || t > traj.horizon() + 1e-12)
        throw std::out_of_range("perturbation_value: t outside solved range");
    Rhs rhs{system.system(), &pert, traj.step() > 0.0 ? traj.step() : 1e-2};
    auto reader = [&traj](double s) { return traj.eval(s); };
    return rhs.perturbation(t, reader);
}

HypothesisReport hypothesis_check(const PerturbationSpec& pert,
                                  const std::vector<SpectralRootRate>& roots, int beta,
                                  double t_max, double tail_threshold) {
    HypothesisReport report;
    report.beta = beta;
    report.threshold = tail_threshold;
    int windows = std::max(1, static_cast<int>(std::floor(t_max)));

    for (const auto& root : roots) {
        HypothesisReport::PerRoot pr;
        pr.root = root;
        int m = root.multiplicity - 1;
        double denom = detail::factorial(root.multiplicity);
        double b = beta == 0 ? 0.0 : root.sigma;
        for (int t = 0; t < windows; ++t) {
            double w = window_weighted_integral(pert.gamma, m, denom, b, static_cast<double>(t));
            if (!std::isfinite(w)) {
                pr.overflow = true;
                pr.first_failing_window = t;
                break;
            }
            pr.window_integrals.push_back(w);
        }
        if (!pr.overflow) {
            int tail_start = std::max(0, windows - std::max(3, windows / 4));
            pr.eventually_decreasing = true;
            for (int t = tail_start + 1; t < windows; ++t) {
                if (pr.window_integrals[t] >
                    pr.window_integrals[t - 1] + 1e-12 * (1.0 + pr.window_integrals[t - 1])) {
                    pr.eventually_decreasing = false;
                    pr.first_failing_window = t;
                    break;
                }
            }
            pr.tail_below_threshold = pr.window_integrals.back() < tail_threshold;
            if (!pr.tail_below_threshold && pr.first_failing_window < 0)
                pr.first_failing_window = windows - 1;
        }
        report.roots.push_back(std::move(pr));
    }

    // Eq-(2.8)-style averages with |f/x| replaced by its envelope gamma:
    // int_t^{t+1} (gamma(s) - K0)_+ ds, piecewise closed form between the sign
    // changes of gamma - K0.
    for (int t = 0; t < windows; ++t) {
        double a = static_cast<double>(t);
        double acc = 0.0;
        const int cells = 64;
        double x0 = a;
        double v0 = pert.gamma_eval(x0) - pert.K0;
        for (int j = 1; j <= cells; ++j) {
            double x1 = a + static_cast<double>(j) / cells;
            double v1 = pert.gamma_eval(x1) - pert.K0;
            if (v0 > 0.0 && v1 > 0.0) {
                acc += exp_poly_integral(pert.gamma, x0, x1) - pert.K0 * (x1 - x0);
            } else if (v0 > 0.0 || v1 > 0.0) {
                double lo = x0, hi = x1;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if ((pert.gamma_eval(mid) - pert.K0 > 0.0) == (v0 > 0.0)) lo = mid;
                    else hi = mid;
                }
                double cross = 0.5 * (lo + hi);
                if (v0 > 0.0)
                    acc += exp_poly_integral(pert.gamma, x0, cross) - pert.K0 * (cross - x0);
                else
                    acc += exp_poly_integral(pert.gamma, cross, x1) - pert.K0 * (x1 - cross);
            }
            x0 = x1;
            v0 = v1;
        }
        report.indicator_averages.push_back(std::max(0.0, acc));
    }

    report.pass = true;
    for (const auto& pr : report.roots)
        if (pr.overflow || !pr.eventually_decreasing || !pr.tail_below_threshold)
            report.pass = false;
    return report;
}

}  // namespace delay_spectra
