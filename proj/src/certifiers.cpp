#include "delay_spectra/certifiers.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <future>

namespace delay_spectra {

namespace {

double max_real_eig(const MatrixXd& a) {
    Eigen::EigenSolver<MatrixXd> es(a, false);
    return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& a) { return max_real_eig(a) < 0.0; }

/// Block row [b1^-1 A_1, ..., bm^-1 A_m] over the delayed point terms.
MatrixXd beta_block(const std::vector<PointTerm>& terms, const std::vector<double>& betas) {
    int n = terms.empty() ? 0 : static_cast<int>(terms.front().A.rows());
    int m = static_cast<int>(terms.size()) - 1;
    if (m <= 0) return MatrixXd::Zero(n, 0);
    MatrixXd block(n, n * m);
    for (int i = 1; i <= m; ++i)
        block.middleCols(static_cast<Eigen::Index>(n) * (i - 1), n) =
            terms[static_cast<size_t>(i)].A / betas[static_cast<size_t>(i - 1)];
    return block;
}

MatrixXd sum_point_matrices(const std::vector<PointTerm>& terms) {
    MatrixXd s = MatrixXd::Zero(terms.front().A.rows(), terms.front().A.cols());
    for (const auto& t : terms) s += t.A;
    return s;
}

bool has_imaginary_axis_eig(const MatrixXd& a, double tol = 1e-9) {
    Eigen::EigenSolver<MatrixXd> es(a, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i).real()) < tol * (1.0 + std::abs(es.eigenvalues()(i))))
            return true;
    return false;
}

double sweep_omega_heuristic(const MatrixXd& m, double extra) {
    return 10.0 * (1.0 + spectral_norm(m) + extra);
}

/// Shifted-axis small-gain test: gain * sup_w sv(((iw - rho)I - M)^(-1)) < 1
/// with M + rho I still Hurwitz.
bool shifted_gain_test(const MatrixXd& m, double gain, double rho, double omega_max) {
    MatrixXd shifted = m + rho * MatrixXd::Identity(m.rows(), m.cols());
    if (!is_hurwitz(shifted)) return false;
    auto transfer = [&](double w) -> MatrixXcd {
        MatrixXcd a = Complex(-rho, w) * MatrixXcd::Identity(m.rows(), m.cols()) - m;
        return a.inverse();
    };
    SweepResult sr = hinf_sweep(transfer, omega_max, 1e-6);
    return !sr.pole_detected && gain * sr.sup < 1.0;
}

double bisect_shift_margin(const MatrixXd& m, double gain, double omega_max) {
    double hi_cap = -max_real_eig(m);
    if (!(hi_cap > 0.0)) return 0.0;
    hi_cap *= 0.999999;
    if (!shifted_gain_test(m, gain, 0.0, omega_max)) return 0.0;
    double lo = 0.0, hi = hi_cap;
    if (shifted_gain_test(m, gain, hi, omega_max)) return hi;
    for (int it = 0; it < 48; ++it) {
        double mid = 0.5 * (lo + hi);
        if (shifted_gain_test(m, gain, mid, omega_max)) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace

double matrix_measure(const MatrixXcd& a) {
    if (a.rows() == 0) return 0.0;
    MatrixXcd herm = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double matrix_measure(const MatrixXd& a) { return matrix_measure(MatrixXcd(a.cast<Complex>())); }

SweepResult hinf_sweep(const std::function<MatrixXcd(double)>& transfer, double omega_max,
                       double refinement_tol) {
    SweepResult result;
    result.omega_max = omega_max;
    result.refinement_tol = refinement_tol;

    // Log-linear coarse grid: half linear on [0, omega_max], half log-spaced.
    std::vector<double> grid;
    grid.reserve(1030);
    const int half = 512;
    for (int i = 0; i < half; ++i) grid.push_back(omega_max * i / (half - 1));
    double w_lo = omega_max * 1e-6;
    for (int i = 0; i < half; ++i)
        grid.push_back(w_lo * std::pow(omega_max / w_lo, double(i) / (half - 1)));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    result.grid_points = static_cast<int>(grid.size());

    auto sv_at = [&](double w) -> double {
        MatrixXcd g = transfer(w);
        if (!g.allFinite()) return std::numeric_limits<double>::infinity();
        return spectral_norm(g);
    };

    std::vector<double> values(grid.size());
    unsigned threads = std::min<unsigned>(thread_cap(), 8);
    if (threads > 1 && grid.size() > 64) {
        std::vector<std::future<void>> futs;
        size_t chunk = (grid.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            size_t lo = t * chunk, hi = std::min(grid.size(), lo + chunk);
            if (lo >= hi) break;
            futs.push_back(std::async(std::launch::async, [&, lo, hi] {
                for (size_t i = lo; i < hi; ++i) values[i] = sv_at(grid[i]);
            }));
        }
        for (auto& f : futs) f.get();
    } else {
        for (size_t i = 0; i < grid.size(); ++i) values[i] = sv_at(grid[i]);
    }

    for (double v : values)
        if (std::isinf(v) || v > 1e12) {
            result.pole_detected = true;
            result.sup = std::numeric_limits<double>::infinity();
            return result;
        }

    // Top 3 local maxima (deterministic: lowest omega wins ties).
    std::vector<size_t> peaks;
    for (size_t i = 0; i < grid.size(); ++i) {
        bool left_ok = i == 0 || values[i] >= values[i - 1];
        bool right_ok = i + 1 == grid.size() || values[i] >= values[i + 1];
        if (left_ok && right_ok) peaks.push_back(i);
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [&](size_t a, size_t b) { return values[a] > values[b]; });
    if (peaks.size() > 3) peaks.resize(3);

    double best = 0.0, best_w = 0.0;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (size_t p : peaks) {
        double a = p == 0 ? grid[0] : grid[p - 1];
        double b = p + 1 == grid.size() ? grid.back() : grid[p + 1];
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = sv_at(c), fd = sv_at(d);
        while (b - a > refinement_tol) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = sv_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = sv_at(d);
            }
        }
        double wm = 0.5 * (a + b);
        double fm = sv_at(wm);
        for (auto [w, f] : {std::pair{wm, fm}, {grid[p], values[p]}}) {
            if (f > best || (f == best && w < best_w)) {
                best = f;
                best_w = w;
            }
        }
    }
    if (peaks.empty() && !values.empty()) {
        best = values[0];
        best_w = grid[0];
    }

    result.sup = best;
    result.omega_star = best_w;
    result.at_boundary = std::abs(best_w - omega_max) < 2.0 * refinement_tol + 1e-12;
    return result;
}

const char* test_id_name(TestId id) {
    switch (id) {
        case TestId::thm41_i_eq42: return "thm41_i_eq42";
        case TestId::thm41_i_eq43: return "thm41_i_eq43";
        case TestId::thm41_ii: return "thm41_ii";
        case TestId::remark43: return "remark43";
        case TestId::thm44_i: return "thm44_i";
        case TestId::thm44_ii: return "thm44_ii";
        case TestId::thm44_iii: return "thm44_iii";
    }
    return "?";
}

std::vector<double> default_betas(int m) {
    if (m <= 0) return {};
    return std::vector<double>(static_cast<size_t>(m), 1.0 / std::sqrt(static_cast<double>(m)));
}

namespace {

std::vector<double> resolve_betas(int m, const std::vector<double>& betas) {
    if (betas.empty()) return default_betas(m);
    if (static_cast<int>(betas.size()) != m)
        throw std::invalid_argument("betas must have one entry per delayed point term");
    double s = 0.0;
    for (double b : betas) {
        if (b <= 0.0) throw std::invalid_argument("betas must be positive");
        s += b * b;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("betas must satisfy sum beta_i^2 = 1");
    return betas;
}

void require_point_only(const DelaySystem& sys, const char* who) {
    if (!sys.volterra_terms.empty() || !sys.finite_dist_terms.empty())
        throw std::invalid_argument(std::string(who) + " requires a point-delay system");
}

}  // namespace

Certificate certify_point_delay_independent(const ValidatedSystem& system,
                                            const std::vector<double>& betas_in) {
    const DelaySystem& sys = system.system();
    require_point_only(sys, "certify_point_delay_independent");
    const int m = static_cast<int>(sys.point_terms.size()) - 1;

    Certificate cert;
    cert.test_id = TestId::thm41_i_eq42;
    cert.betas = resolve_betas(m, betas_in);

    const MatrixXd& a0 = sys.point_terms.front().A;
    bool hurwitz = is_hurwitz(a0);
    cert.values["max_re_eig_A0"] = max_real_eig(a0);
    cert.values["kappa2_A0"] = matrix_measure(a0);

    MatrixXd block = beta_block(sys.point_terms, cert.betas);
    double block_norm = spectral_norm(block);
    cert.values["block_norm"] = block_norm;

    bool route42 = false, route43 = false;
    if (m == 0) {
        // Delay-free: both routes degenerate to A_0 Hurwitz.
        route42 = hurwitz;
        route43 = hurwitz && cert.values["kappa2_A0"] < 0.0;
        cert.sweep.sup = 0.0;
    } else {
        MatrixXd msum = sum_point_matrices(sys.point_terms);
        if (has_imaginary_axis_eig(msum)) {
            cert.notes += "imaginary-axis pole of (iwI - sum A_i)^-1; sweep route unavailable. ";
            cert.sweep.pole_detected = true;
        } else {
            double omega_max = sweep_omega_heuristic(msum, block_norm);
            auto transfer = [&](double w) -> MatrixXcd {
                MatrixXcd a =
                    Complex(0.0, w) * MatrixXcd::Identity(sys.n, sys.n) - msum.cast<Complex>();
                return a.inverse() * block.cast<Complex>();
            };
            cert.sweep = hinf_sweep(transfer, omega_max);
            route42 = !cert.sweep.pole_detected && cert.sweep.sup < 1.0;
        }
        route43 = block_norm < -cert.values["kappa2_A0"];
    }
    cert.values["eq42_sup"] = cert.sweep.sup;
    cert.values["eq42_margin"] = 1.0 - cert.sweep.sup;
    cert.values["eq43_margin"] = -cert.values["kappa2_A0"] - block_norm;
    cert.values["route42"] = route42 ? 1.0 : 0.0;
    cert.values["route43"] = route43 ? 1.0 : 0.0;
    cert.certified = hurwitz && (route42 || route43);
    if (!hurwitz) cert.notes += "A_0 is not a stability matrix. ";
    return cert;
}

Certificate abscissa_bound(const ValidatedSystem& system, const std::vector<double>& betas_in) {
    const DelaySystem& sys = system.system();
    Certificate base = certify_point_delay_independent(system, betas_in);

    Certificate cert;
    cert.test_id = TestId::thm41_ii;
    cert.betas = base.betas;
    cert.values = base.values;
    cert.sweep = base.sweep;
    cert.notes = base.notes;
    cert.certified = base.certified;
    if (!base.certified) {
        cert.notes += "point-delay certificate failed; abscissa bound not established. ";
        return cert;
    }

    const MatrixXd& a0 = sys.point_terms.front().A;
    double rho01 = 0.0;
    auto svals = a0.jacobiSvd().singularValues();
    double smin = svals(svals.size() - 1);
    if (smin < 1e-300) {
        cert.notes += "A_0 singular; rho_01 route skipped. ";
    } else {
        rho01 = smin;  // 1/||A_0^-1||_2
        cert.values["rho_01"] = rho01;
    }

    MatrixXd msum = sum_point_matrices(sys.point_terms);
    double rho02 = 0.0;
    if (!has_imaginary_axis_eig(msum)) {
        auto transfer = [&](double w) -> MatrixXcd {
            MatrixXcd a = Complex(0.0, w) * MatrixXcd::Identity(sys.n, sys.n) - msum.cast<Complex>();
            return a.inverse();
        };
        SweepResult sr = hinf_sweep(transfer, sweep_omega_heuristic(msum, 0.0));
        if (!sr.pole_detected && sr.sup > 0.0) {
            rho02 = 1.0 / sr.sup;
            cert.values["rho_02"] = rho02;
        }
    }

    double rho0 = 0.0;
    if (rho01 > 0.0 && rho02 > 0.0) rho0 = std::min(rho01, rho02);
    else rho0 = std::max(rho01, rho02);
    cert.values["rho_0"] = rho0;

    double rho_meas = -cert.values["kappa2_A0"] - cert.values["block_norm"];
    if (rho_meas > 0.0) cert.values["rho_meas"] = rho_meas;
    else rho_meas = 0.0;

    double rho = std::max(rho0, rho_meas);
    cert.abscissa_bound = std::min(0.0, -rho);
    cert.values["abscissa_bound"] = *cert.abscissa_bound;
    return cert;
}

Certificate certify_remark43(const ValidatedSystem& system) {
    const DelaySystem& sys = system.system();
    require_point_only(sys, "certify_remark43");
    const int m = static_cast<int>(sys.point_terms.size()) - 1;

    Certificate cert;
    cert.test_id = TestId::remark43;
    cert.betas = default_betas(m);

    const MatrixXd& a0 = sys.point_terms.front().A;
    if (!is_hurwitz(a0)) {
        cert.notes = "A_0 is not a stability matrix.";
        return cert;
    }
    if (m == 0) {
        cert.certified = true;
        cert.values["a0_gain"] = 0.0;
        return cert;
    }

    MatrixXd delayed_sum = MatrixXd::Zero(sys.n, sys.n);
    for (size_t i = 1; i < sys.point_terms.size(); ++i) delayed_sum += sys.point_terms[i].A;
    auto transfer = [&](double w) -> MatrixXcd {
        MatrixXcd a = Complex(0.0, w) * MatrixXcd::Identity(sys.n, sys.n) - a0.cast<Complex>();
        return a.inverse() * delayed_sum.cast<Complex>();
    };
    cert.sweep = hinf_sweep(transfer, sweep_omega_heuristic(a0, spectral_norm(delayed_sum)));
    double gain_a0 = cert.sweep.sup;
    cert.values["a0_gain"] = gain_a0;

    MatrixXd block = beta_block(sys.point_terms, cert.betas);
    double block_norm = spectral_norm(block);
    cert.values["block_norm"] = block_norm;

    if (gain_a0 >= 1.0) {
        cert.notes = "a0 gain >= 1.";
        return cert;
    }
    if (gain_a0 == 0.0) {
        cert.certified = true;
        cert.values["rho_max"] = std::numeric_limits<double>::infinity();
        return cert;
    }
    cert.certified = block_norm < 1.0 / gain_a0;
    if (cert.certified) {
        // Largest rho with ||block|| < (1 - rho a0)/a0, capped by rho < 1/a0.
        double rho_max = (1.0 - gain_a0 * block_norm) / gain_a0;
        cert.values["rho_max"] = std::min(rho_max, 1.0 / gain_a0);
    }
    return cert;
}

Certificate certify_mixed(const ValidatedSystem& system) {
    const DelaySystem& sys = system.system();
    if (sys.point_terms.size() != 2 || !sys.volterra_terms.empty() ||
        sys.finite_dist_terms.size() != 1)
        throw std::invalid_argument(
            "certify_mixed requires exactly A_0, one delayed point term and one finite kernel");

    const MatrixXd& a0 = sys.point_terms[0].A;
    const MatrixXd& a1 = sys.point_terms[1].A;
    const FiniteDistTerm& ft = sys.finite_dist_terms[0];

    // Endpoint values of the kernel alpha mapped onto [-1, 0]:
    // alpha(0) = alpha_at_zero * A, alpha(-1) = (alpha_at_zero + full mass) * A.
    MatrixXd alpha_0 = ft.kernel.alpha_at_zero * ft.A;
    MatrixXd alpha_m1 = (ft.kernel.alpha_at_zero + ft.kernel.full_mass()) * ft.A;
    double tv2 = ft.kernel.total_variation() * spectral_norm(ft.A);
    double a1_norm = spectral_norm(a1);

    Certificate cert;
    cert.test_id = TestId::thm44_i;
    cert.values["TV2_alpha"] = tv2;
    cert.values["A1_norm"] = a1_norm;
    cert.values["alpha0_norm"] = spectral_norm(alpha_0);
    cert.values["alpha_m1_norm"] = spectral_norm(alpha_m1);

    struct Arrangement {
        TestId id;
        MatrixXd m;
        double gain;
    };
    std::vector<Arrangement> arrangements;
    arrangements.push_back({TestId::thm44_i, a0, a1_norm + tv2});
    arrangements.push_back({TestId::thm44_ii, a0 + alpha_0 - alpha_m1,
                            a1_norm + spectral_norm(alpha_0) + spectral_norm(alpha_m1)});
    arrangements.push_back({TestId::thm44_iii, a0 + a1 + alpha_0 - alpha_m1,
                            2.0 * a1_norm + spectral_norm(alpha_0) + spectral_norm(alpha_m1)});

    double best_shift = 0.0;
    for (const auto& arr : arrangements) {
        SubVerdict sub;
        sub.id = arr.id;
        sub.gain = arr.gain;
        double kappa = matrix_measure(arr.m);
        cert.values[std::string("kappa2_") + test_id_name(arr.id)] = kappa;
        if (!is_hurwitz(arr.m)) {
            sub.reason = "pivot matrix not Hurwitz";
            cert.subs.push_back(std::move(sub));
            continue;
        }
        if (has_imaginary_axis_eig(arr.m)) {
            sub.reason = "imaginary-axis pole";
            cert.subs.push_back(std::move(sub));
            continue;
        }
        double omega_max = sweep_omega_heuristic(arr.m, arr.gain);
        auto transfer = [&](double w) -> MatrixXcd {
            MatrixXcd a =
                Complex(0.0, w) * MatrixXcd::Identity(sys.n, sys.n) - arr.m.cast<Complex>();
            return a.inverse();
        };
        sub.sweep = hinf_sweep(transfer, omega_max);
        sub.resolvent_sup = sub.sweep.sup;
        sub.certified = !sub.sweep.pole_detected && arr.gain * sub.sweep.sup < 1.0;
        if (sub.certified) {
            sub.margin = 1.0 - arr.gain * sub.sweep.sup;
            sub.shift_margin = bisect_shift_margin(arr.m, arr.gain, omega_max);
            best_shift = std::max(best_shift, sub.shift_margin);
        } else {
            sub.reason = "small-gain product >= 1";
        }
        cert.subs.push_back(std::move(sub));
    }

    for (const auto& sub : cert.subs) cert.certified = cert.certified || sub.certified;
    if (cert.certified && best_shift > 0.0) {
        cert.abscissa_bound = -best_shift;
        cert.values["abscissa_bound"] = -best_shift;
    }
    cert.notes +=
        "gain x resolvent-sup < 1 orientation; ||int lambda d(alpha)|| bounded by TV2(alpha).";
    return cert;
}

}  // namespace delay_spectra
