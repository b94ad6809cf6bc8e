#include "delay_spectra/asymptotics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "delay_spectra/simulator.hpp"

namespace delay_spectra {

namespace {

struct FitData {
    std::vector<double> t, y;
    double periods_in_window = 0.0;  // set by the smoother when a period was found
};

ExponentFit fit_log_regression(const FitData& data, Norm norm) {
    const int npts = static_cast<int>(data.t.size());
    if (npts < 8) throw std::invalid_argument("exponent fit window too short");
    Eigen::MatrixXd X(npts, 3);
    Eigen::VectorXd Y(npts);
    for (int i = 0; i < npts; ++i) {
        X(i, 0) = data.t[i];
        X(i, 1) = std::log(data.t[i]);
        X(i, 2) = 1.0;
        Y(i) = data.y[i];
    }
    Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::VectorXd beta = xtx.ldlt().solve(X.transpose() * Y);
    Eigen::VectorXd resid = Y - X * beta;
    double ss_res = resid.squaredNorm();
    double mean = Y.mean();
    double ss_tot = (Y.array() - mean).matrix().squaredNorm();
    double sigma2 = ss_res / std::max(1, npts - 3);
    Eigen::MatrixXd cov = sigma2 * xtx.inverse();

    ExponentFit fit;
    fit.mu_hat = beta(0);
    fit.logt_coef = beta(1);
    fit.nu_hat = std::max(1.0, 1.0 + beta(1));
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.se_mu = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.se_resid = std::sqrt(sigma2);
    fit.norm = norm;
    fit.t1 = data.t.front();
    fit.t2 = data.t.back();
    fit.n_points = npts;
    return fit;
}

/// A complex dominant pair makes log|x_t| a line plus a periodic wiggle whose
/// leakage into the near-collinear {t, log t} pair biases the slope. Detect
/// the period from the residual autocorrelation and average it out with a
/// one-period moving window (exact for line + periodic).
FitData smooth_periodic(const FitData& data, const ExponentFit& first_pass) {
    const int npts = static_cast<int>(data.t.size());
    if (npts < 32 || first_pass.se_resid < 1e-9 || first_pass.se_mu < 1e-4) return data;
    std::vector<double> resid(npts);
    for (int i = 0; i < npts; ++i)
        resid[i] = data.y[i] - first_pass.mu_hat * data.t[i] -
                   first_pass.logt_coef * std::log(data.t[i]);
    double mean = 0.0;
    for (double r : resid) mean += r;
    mean /= npts;
    for (double& r : resid) r -= mean;
    double var = 0.0;
    for (double r : resid) var += r * r;
    if (var <= 0.0) return data;

    int best_lag = 0;
    double best_corr = 0.0;
    bool dipped = false;
    for (int lag = 1; lag <= npts / 2; ++lag) {
        double acc = 0.0;
        for (int i = 0; i + lag < npts; ++i) acc += resid[i] * resid[i + lag];
        double corr = acc / var;
        if (corr < 0.0) dipped = true;
        if (dipped && corr > best_corr) {
            best_corr = corr;
            best_lag = lag;
        }
    }
    if (best_lag < 4 || best_corr < 0.25) return data;

    int w = best_lag;  // moving-average width = one wiggle period
    if (npts - w < 16) return data;
    FitData out;
    out.periods_in_window = static_cast<double>(npts) / w;
    for (int i = 0; i + w <= npts; ++i) {
        double acc = 0.0;
        for (int j = 0; j < w; ++j) acc += data.y[i + j];
        out.t.push_back(0.5 * (data.t[i] + data.t[i + w - 1]));
        out.y.push_back(acc / w);
    }
    return out;
}

double auto_step(const ValidatedSystem& system, double horizon) {
    double step = std::min(0.01, horizon / 4000.0);
    double min_delay = std::numeric_limits<double>::infinity();
    for (const auto& pt : system.system().point_terms)
        if (pt.h > 0.0) min_delay = std::min(min_delay, pt.h);
    if (std::isfinite(min_delay)) step = std::min(step, min_delay / 4.0);
    return std::max(step, horizon * 1e-6);
}

}  // namespace

ExponentFit estimate_exponent(const Trajectory& traj, double h, double window_frac, Norm norm) {
    double T = traj.horizon();
    if (!(window_frac > 0.0) || window_frac > 1.0)
        throw std::invalid_argument("window_frac must lie in (0, 1]");
    double t1 = std::max(T * (1.0 - window_frac), 1e-3);
    if (h > 0.0 && T * window_frac < 10.0 * h)
        throw std::invalid_argument("window too short: need horizon * window_frac >= 10 h");
    double t2 = T;
    if (t2 <= t1) throw std::invalid_argument("window too short");

    int target = 1200;
    double dt = std::max((t2 - t1) / target, traj.step() > 0.0 ? traj.step() : (t2 - t1) / target);
    FitData data;
    for (double t = t1; t <= t2 + dt * 0.5; t += dt) {
        double tc = std::min(t, t2);
        double v = string_norm(traj, tc, std::min(h, tc - traj.t0() + (traj.history() ? traj.history()->h() : 0.0)), norm);
        if (v <= 0.0 || !std::isfinite(v))
            throw std::invalid_argument("zero or underflowed trajectory tail");
        double lv = std::log(v);
        if (lv < -700.0) throw std::invalid_argument("trajectory tail underflowed");
        data.t.push_back(tc);
        data.y.push_back(lv);
        if (tc >= t2) break;
    }

    // Trim the part of the tail that sank below the resolvable range of the
    // run, where the integrator's absolute error floor flattens the slope.
    double sup_log = -std::numeric_limits<double>::infinity();
    double traj_sup = 0.0;
    for (double t = traj.t0(); t <= T; t += std::max(dt, (T - traj.t0()) / 512.0))
        traj_sup = std::max(traj_sup, vec_norm(traj.eval(t), norm));
    if (traj_sup > 0.0) sup_log = std::log(traj_sup);
    if (std::isfinite(sup_log)) {
        size_t keep = data.t.size();
        while (keep > 0 && data.y[keep - 1] < sup_log - 27.0) --keep;
        if (keep < data.t.size()) {
            if (keep < 8) throw std::invalid_argument("trajectory tail underflowed");
            data.t.resize(keep);
            data.y.resize(keep);
        }
    }

    ExponentFit first = fit_log_regression(data, norm);
    FitData smoothed = smooth_periodic(data, first);
    if (smoothed.t.size() == data.t.size()) {
        // Eigensolution orders are small integers; a large log t coefficient on
        // a tail window signals structure the regressors cannot represent
        // (e.g. an oscillation slower than the window).
        if (std::abs(first.logt_coef) > 3.0) first.oscillation_warning = true;
        return first;
    }
    ExponentFit refit = fit_log_regression(smoothed, norm);
    if (smoothed.periods_in_window > 0.0 && smoothed.periods_in_window < 3.0)
        refit.oscillation_warning = true;
    if (std::abs(refit.logt_coef) > 3.0) refit.oscillation_warning = true;
    // Moving-average points are serially correlated over one window; scale the
    // slope error by sqrt(window) to reflect the effective sample size.
    double w = static_cast<double>(data.t.size() - smoothed.t.size() + 1);
    refit.se_mu *= std::sqrt(w);
    return refit;
}

const char* gamma_class_name(GammaClass g) {
    switch (g) {
        case GammaClass::exp_decay_a: return "exp_decay_a";
        case GammaClass::integrable_b: return "integrable_b";
        case GammaClass::little_o_power_c: return "little_o_power_c";
        case GammaClass::bounded_only: return "bounded_only";
    }
    return "?";
}

GammaClassification classify_gamma(const PerturbationSpec& pert, int nu) {
    GammaClassification out;
    std::vector<ExpPolyTerm> live;
    for (const auto& t : pert.gamma)
        if (t.c != 0.0) live.push_back(t);
    if (live.empty()) {
        out.cls = GammaClass::exp_decay_a;
        out.a = std::numeric_limits<double>::infinity();
        return out;
    }
    double min_d = std::numeric_limits<double>::infinity();
    for (const auto& t : live) min_d = std::min(min_d, t.d);
    if (min_d > 0.0) {
        out.cls = GammaClass::exp_decay_a;
        out.a = min_d;
        return out;
    }
    // Terms with d <= 0 decide the tail: gamma ~ c t^k e^{|d| t}.
    bool integrable = true;
    bool little_o = true;
    for (const auto& t : live) {
        if (t.d > 0.0) continue;
        if (t.d < 0.0) {
            integrable = false;
            little_o = false;
            break;
        }
        // d == 0: int t^{nu-1} c t^k dt diverges for every k >= 0.
        integrable = false;
        // gamma <= o(t^{1-nu}) needs k < 1 - nu (strict when nu = 1): impossible for k >= 0.
        if (t.k >= 1 - nu) little_o = false;
    }
    if (integrable) out.cls = GammaClass::integrable_b;
    else if (little_o) out.cls = GammaClass::little_o_power_c;
    else out.cls = GammaClass::bounded_only;
    return out;
}

const char* comparison_class_name(ComparisonClass c) {
    switch (c) {
        case ComparisonClass::small_o_exp: return "small_o_exp";
        case ComparisonClass::small_o_mu: return "small_o_mu";
        case ComparisonClass::big_O_c: return "big_O_c";
    }
    return "?";
}

ComparisonReport perron_compare(const ValidatedSystem& system, const PerturbationSpec& pert,
                                const HistoryFunction& history, double horizon,
                                const CompareOptions& opts) {
    const DelaySystem& sys = system.system();
    double sigma_min = opts.sigma_min != 0.0 ? opts.sigma_min : -(1.0 + 2.0 * sigma_cap(system));
    AbscissaResult spec = spectral_abscissa(system, sigma_min);
    if (spec.dominant.empty()) throw SpectrumError("no dominant root found in the search region");
    for (const auto& r : spec.dominant)
        if (r.multiplicity != 1)
            throw SpectrumError("perron_compare requires a simple dominant root");

    double mu = spec.mu;
    double step = opts.step > 0.0 ? opts.step : auto_step(system, horizon);
    Trajectory x = integrate_perturbed(system, pert, history, horizon, step);
    Trajectory x_half = integrate_perturbed(system, pert, history, horizon, step / 2.0);

    ComparisonReport report;
    report.mu = mu;
    report.gamma_class = classify_gamma(pert, 1).cls;

    // Basis {Re(v e^{l t}), Im(v e^{l t})} over the upper-half dominant roots,
    // shifted by t1 so the Gram matrix stays well scaled.
    std::vector<Eigensolution> sols;
    for (const auto& r : spec.dominant) {
        if (r.lambda.imag() < -1e-9) continue;
        sols.push_back(eigensolution(system, r));
        report.basis_roots.push_back(r.lambda);
    }

    double t1 = std::max(horizon * (1.0 - opts.window_frac), 1e-3);
    double t2 = horizon;
    int target = 1000;
    double dt = std::max((t2 - t1) / target, step);

    std::vector<double> ts;
    for (double t = t1; t <= t2 + 0.5 * dt; t += dt) ts.push_back(std::min(t, t2));

    int nb = 0;
    for (const auto& s : sols) nb += (std::abs(s.lambda.imag()) <= 1e-9) ? 1 : 2;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);

    auto basis_at = [&](double t) {
        std::vector<VectorXd> cols;
        for (const auto& s : sols) {
            Complex e = std::exp(s.lambda * Complex(t - t1, 0.0));
            VectorXcd ve = s.v * e;
            cols.push_back(ve.real());
            if (std::abs(s.lambda.imag()) > 1e-9) cols.push_back(-ve.imag());
        }
        return cols;
    };

    for (double t : ts) {
        auto cols = basis_at(t);
        VectorXd xv = x.eval(t);
        for (int i = 0; i < nb; ++i) {
            rhs(i) += cols[static_cast<size_t>(i)].dot(xv);
            for (int j = 0; j < nb; ++j)
                gram(i, j) += cols[static_cast<size_t>(i)].dot(cols[static_cast<size_t>(j)]);
        }
    }
    Eigen::VectorXd coeff = gram.ldlt().solve(rhs);

    // Goodness of the amplitude fit (uncentered r^2 of the vector regression).
    double ss_res = 0.0, ss_tot = 0.0;
    for (double t : ts) {
        auto cols = basis_at(t);
        VectorXd fit = VectorXd::Zero(sys.n);
        for (int i = 0; i < nb; ++i) fit += coeff(i) * cols[static_cast<size_t>(i)];
        VectorXd xv = x.eval(t);
        ss_res += (xv - fit).squaredNorm();
        ss_tot += xv.squaredNorm();
    }
    report.fit_r2 = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;

    // Amplitude of the first dominant root, unshifted: coefficients fit against
    // e^{l (t - t1)} correspond to c e^{-l t1} in natural scale.
    if (!sols.empty()) {
        Complex shifted;
        if (std::abs(sols[0].lambda.imag()) > 1e-9) shifted = Complex(coeff(0), coeff(1));
        else shifted = Complex(coeff(0), 0.0);
        report.c_hat = shifted * std::exp(-sols[0].lambda * Complex(t1, 0.0));
    }

    // Residual x - y as a synthetic trajectory, floor-trimmed before fitting.
    auto eval_y = [&](double t) {
        VectorXd y = VectorXd::Zero(sys.n);
        int ci = 0;
        for (const auto& s : sols) {
            Complex e = std::exp(s.lambda * Complex(t - t1, 0.0));
            VectorXcd ve = s.v * e;
            y += coeff(ci++) * ve.real();
            if (std::abs(s.lambda.imag()) > 1e-9) y += coeff(ci++) * (-ve.imag());
        }
        return y;
    };

    double sup_x = 0.0;
    for (double t = 0.0; t <= horizon; t += std::max(step, horizon / 2000.0))
        sup_x = std::max(sup_x, x.eval(t).norm());
    // Floor sits above the discretization error of the run, not at machine eps.
    double floor = std::max(sup_x * 1e-9, 1e-280);

    double r_t1 = std::max({2.0 * sys.h, 0.05 * horizon, 0.5});
    double r_t2 = r_t1;
    for (double t = r_t1; t <= horizon; t += std::max(step, horizon / 4000.0)) {
        if ((x.eval(t) - eval_y(t)).norm() > floor) r_t2 = t;
    }

    auto residual_fn = [&](double t) -> VectorXd { return x.eval(t) - eval_y(t); };
    bool fit_ok = r_t2 > r_t1 + std::max(1.0, 0.05 * horizon);
    if (fit_ok) {
        Trajectory resid = Trajectory::tabulate(residual_fn, r_t1, r_t2,
                                                std::max(step, (r_t2 - r_t1) / 2000.0));
        try {
            report.residual_fit = estimate_exponent(resid, 0.0, 1.0 - r_t1 / r_t2, opts.norm);
            report.residual_rate = report.residual_fit.mu_hat;
            // Re-fit against the half-step run; accept only when both agree.
            auto residual_fn_half = [&](double t) -> VectorXd {
                return x_half.eval(t) - eval_y(t);
            };
            Trajectory resid_half = Trajectory::tabulate(residual_fn_half, r_t1, r_t2,
                                                         std::max(step / 2.0, (r_t2 - r_t1) / 2000.0));
            ExponentFit fit_half =
                estimate_exponent(resid_half, 0.0, 1.0 - r_t1 / r_t2, opts.norm);
            double tol = 2.0 * std::max({report.residual_fit.se_mu, fit_half.se_mu, 1e-6});
            if (std::abs(fit_half.mu_hat - report.residual_fit.mu_hat) > std::max(tol, 0.05))
                report.verdict = "inconclusive";
        } catch (const std::invalid_argument&) {
            fit_ok = false;
        }
    }
    if (!fit_ok) {
        report.residual_below_floor = true;
        report.residual_rate = -std::numeric_limits<double>::infinity();
    }

    try {
        ExponentFit xfit = estimate_exponent(x, sys.h, opts.window_frac, opts.norm);
        report.solution_rate = xfit.mu_hat;
    } catch (const std::invalid_argument&) {
        report.solution_rate = std::numeric_limits<double>::quiet_NaN();
    }

    report.epsilon_hat = mu - report.residual_rate;
    report.trajectory = std::make_shared<Trajectory>(x);
    report.fitted_eigensolution = [sols, coeff, t1, n = sys.n](double t) {
        VectorXd y = VectorXd::Zero(n);
        int ci = 0;
        for (const auto& s : sols) {
            Complex e = std::exp(s.lambda * Complex(t - t1, 0.0));
            VectorXcd ve = s.v * e;
            y += coeff(ci++) * ve.real();
            if (std::abs(s.lambda.imag()) > 1e-9) y += coeff(ci++) * (-ve.imag());
        }
        return y;
    };

    bool roots_all_stable = spec.all.abscissa < 0.0;
    if (pert.K0 > 0.0 && roots_all_stable) {
        report.classification = ComparisonClass::big_O_c;
        report.mu_not_characteristic = true;
    } else if (report.gamma_class == GammaClass::exp_decay_a) {
        report.classification = ComparisonClass::small_o_exp;
    } else if (report.gamma_class == GammaClass::integrable_b ||
               report.gamma_class == GammaClass::little_o_power_c) {
        report.classification = ComparisonClass::small_o_mu;
    } else {
        report.classification = ComparisonClass::big_O_c;
    }

    if (report.verdict.empty()) {
        bool consistent = true;
        switch (report.classification) {
            case ComparisonClass::small_o_exp:
                consistent = report.residual_below_floor || report.epsilon_hat > 0.0;
                break;
            case ComparisonClass::small_o_mu:
                consistent = report.residual_below_floor || report.residual_rate < mu + 1e-3;
                break;
            case ComparisonClass::big_O_c:
                if (report.mu_not_characteristic)
                    consistent = std::isfinite(report.solution_rate)
                                     ? std::abs(report.solution_rate) < 0.05
                                     : true;
                break;
        }
        if (!report.residual_below_floor && report.residual_fit.r2 < 0.9 &&
            report.classification != ComparisonClass::big_O_c)
            report.verdict = "inconclusive";
        else
            report.verdict = consistent ? "consistent" : "inconsistent";
    }
    return report;
}

StabilityVerdict verify_stability_verdict(const ValidatedSystem& system,
                                          const PerturbationSpec& pert,
                                          const std::vector<HistoryFunction>& histories,
                                          double horizon, const CompareOptions& opts) {
    if (histories.size() < 3)
        throw std::invalid_argument("verify_stability_verdict needs at least 3 histories");
    const DelaySystem& sys = system.system();
    double sigma_min = opts.sigma_min != 0.0 ? opts.sigma_min : -(1.0 + 2.0 * sigma_cap(system));
    AbscissaResult spec = spectral_abscissa(system, sigma_min);
    bool dominants_simple = true;
    for (const auto& r : spec.dominant) dominants_simple &= (r.multiplicity == 1);

    StabilityVerdict verdict;
    verdict.mu = spec.mu;
    verdict.exponential_branch = spec.mu < -1e-7 && pert.K0 == 0.0;
    verdict.bounded_branch = spec.mu <= 1e-7 && dominants_simple;

    double step = opts.step > 0.0 ? opts.step : auto_step(system, horizon);
    verdict.pass = true;
    for (const auto& hist : histories) {
        StabilityVerdict::PerHistory ph;
        ph.history_norm = hist.sup_norm(opts.norm);
        try {
            Trajectory x = integrate_perturbed(system, pert, hist, horizon, step);
            double sup = 0.0;
            for (double t = 0.0; t <= horizon; t += std::max(step, horizon / 4000.0))
                sup = std::max(sup, vec_norm(x.eval(t), opts.norm));
            ph.sup_norm = sup;

            if (verdict.exponential_branch) {
                ExponentFit fit = estimate_exponent(x, sys.h, opts.window_frac, opts.norm);
                ph.mu_hat = fit.mu_hat;
                ph.exponential_ok = fit.mu_hat <= spec.mu + 0.05;
                if (!ph.exponential_ok)
                    ph.detail = "decay rate " + std::to_string(fit.mu_hat) + " above mu + 0.05";
            }
            if (verdict.bounded_branch) {
                // Uniform boundedness: a generous envelope in (||phi||, K0) plus
                // no growth from the first half of the run to the second.
                double early_sup = 0.0, late_sup = 0.0;
                for (double t = 0.0; t <= horizon; t += std::max(step, horizon / 4000.0)) {
                    double v = vec_norm(x.eval(t), opts.norm);
                    if (t > 0.5 * horizon) late_sup = std::max(late_sup, v);
                    else early_sup = std::max(early_sup, v);
                }
                double envelope = 100.0 * (ph.history_norm + pert.K0 + pert.f0.sup_bound + 1e-12);
                bool no_growth = late_sup <= 1.1 * early_sup + 10.0 * pert.K0 + 1e-9;
                ph.bounded_ok = sup <= envelope && no_growth;
                if (!ph.bounded_ok) ph.detail += " boundedness check failed";
            }
        } catch (const SimulationError& e) {
            ph.blow_up = true;
            ph.exponential_ok = ph.bounded_ok = false;
            ph.detail = e.what();
        }
        verdict.pass = verdict.pass && ph.exponential_ok && ph.bounded_ok && !ph.blow_up;
        verdict.histories.push_back(std::move(ph));
    }
    return verdict;
}

}  // namespace delay_spectra
