#include "delay_spectra/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace delay_spectra {

Trajectory::Trajectory(double t0, double step, std::vector<double> times,
                       std::vector<VectorXd> samples, std::vector<VectorXd> derivatives,
                       std::shared_ptr<const HistoryFunction> history, double max_delay)
    : t0_(t0),
      step_(step),
      times_(std::move(times)),
      samples_(std::move(samples)),
      derivs_(std::move(derivatives)),
      history_(std::move(history)),
      max_delay_(max_delay) {}

Trajectory Trajectory::tabulate(const std::function<VectorXd(double)>& fn, double t0,
                                double horizon, double step,
                                std::shared_ptr<const HistoryFunction> history,
                                double max_delay) {
    std::vector<double> times;
    std::vector<VectorXd> xs, fs;
    const double eps = step * 1e-4;
    for (double t = t0; t <= horizon + step * 0.5; t += step) {
        double tc = std::min(t, horizon);
        times.push_back(tc);
        xs.push_back(fn(tc));
        VectorXd ahead = fn(std::min(tc + eps, horizon));
        VectorXd behind = fn(std::max(tc - eps, t0));
        fs.push_back((ahead - behind) / (2.0 * eps));
        if (tc >= horizon) break;
    }
    return Trajectory(t0, step, std::move(times), std::move(xs), std::move(fs),
                      std::move(history), max_delay);
}

VectorXd Trajectory::eval(double t) const {
    if (t <= t0_) {
        if (t == t0_ && !samples_.empty()) return samples_.front();
        if (history_) return history_->eval(t - t0_);
        throw std::out_of_range("trajectory evaluated before t0 without history");
    }
    if (times_.empty()) throw std::out_of_range("empty trajectory");
    if (t > times_.back() + 1e-9 * (1.0 + std::abs(times_.back())))
        throw std::out_of_range("trajectory evaluated past horizon");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    size_t j = static_cast<size_t>(std::max<std::ptrdiff_t>(1, it - times_.begin()));
    j = std::min(j, times_.size() - 1);
    double ta = times_[j - 1], tb = times_[j];
    double dt = tb - ta;
    if (dt <= 0.0) return samples_[j];
    double u = std::clamp((t - ta) / dt, 0.0, 1.0);
    // Cubic Hermite on (x_a, f_a, x_b, f_b).
    double u2 = u * u, u3 = u2 * u;
    double h00 = 2 * u3 - 3 * u2 + 1;
    double h10 = u3 - 2 * u2 + u;
    double h01 = -2 * u3 + 3 * u2;
    double h11 = u3 - u2;
    return h00 * samples_[j - 1] + (h10 * dt) * derivs_[j - 1] + h01 * samples_[j] +
           (h11 * dt) * derivs_[j];
}

double string_norm(const Trajectory& traj, double t, double h, Norm norm) {
    if (h < 0.0) throw std::invalid_argument("string_norm: negative window");
    double lo = t - h;
    if (t > traj.horizon() + 1e-9 * (1.0 + std::abs(t)))
        throw std::out_of_range("string_norm: t past trajectory horizon");
    double hist_lo = traj.t0() - (traj.history() ? traj.history()->h() : 0.0);
    if (lo < hist_lo - 1e-9 * (1.0 + std::abs(hist_lo)))
        throw std::out_of_range("string_norm: window extends before available history");
    lo = std::max(lo, hist_lo);
    double best = vec_norm(traj.eval(std::min(t, traj.horizon())), norm);
    if (h == 0.0) return best;

    double res = traj.step() > 0.0 ? traj.step() / 2.0 : h / 64.0;
    res = std::min(res, h / 8.0);
    int steps = std::max(1, static_cast<int>(std::ceil((t - lo) / res)));
    for (int i = 0; i <= steps; ++i) {
        double s = lo + (t - lo) * i / steps;
        best = std::max(best, vec_norm(traj.eval(std::min(s, traj.horizon())), norm));
    }
    if (traj.history()) {
        for (double b : traj.history()->breakpoints()) {
            double s = traj.t0() + b;
            if (s >= lo && s <= t)
                best = std::max(best, vec_norm(traj.eval(s), norm));
        }
    }
    return best;
}

}  // namespace delay_spectra
