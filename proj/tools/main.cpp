#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "delay_spectra/io.hpp"

using namespace delay_spectra;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitNegativeVerdict = 3;
constexpr int kExitNumericalFailure = 4;

struct Options {
    std::string input;
    std::string out_dir = ".";
    double step = 0.0;
    double horizon = 0.0;
    std::string region;
    std::string norm = "l2";
    double tol = 0.0;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("input", opt.input, "system spec file (JSON)")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--step", opt.step, "integration step");
    cmd->add_option("--horizon", opt.horizon, "integration horizon");
    cmd->add_option("--region", opt.region, "root search region re_min,re_max,im_max");
    cmd->add_option("--norm", opt.norm, "vector norm: l1, l2, linf");
    cmd->add_option("--tol", opt.tol, "tolerance override");
    cmd->add_option("--seed", opt.seed, "seed for randomized suites");
}

struct Loaded {
    ValidatedSystem system;
    HistoryFunction history;
    std::optional<PerturbationSpec> perturbation;
};

Loaded load_and_validate(const Options& opt) {
    LoadedSpec spec = load_spec_file(opt.input);
    ValidationResult vr = validate_system(spec.system);
    if (!vr.ok()) {
        std::cerr << "invalid system spec:\n";
        for (const auto& e : vr.errors) std::cerr << "  - " << e << "\n";
        throw CLI::RuntimeError(kExitInvalidInput);
    }
    if (spec.perturbation) {
        auto errs = spec.perturbation->validate_against(*vr.system);
        if (!errs.empty()) {
            std::cerr << "invalid perturbation:\n";
            for (const auto& e : errs) std::cerr << "  - " << e << "\n";
            throw CLI::RuntimeError(kExitInvalidInput);
        }
    }
    return Loaded{*vr.system, std::move(spec.history), std::move(spec.perturbation)};
}

double pick_step(const Options& opt, const ValidatedSystem& vs, double horizon) {
    if (opt.step > 0.0) return opt.step;
    double step = std::min(0.01, horizon / 4000.0);
    double min_delay = std::numeric_limits<double>::infinity();
    for (const auto& pt : vs.system().point_terms)
        if (pt.h > 0.0) min_delay = std::min(min_delay, pt.h);
    if (std::isfinite(min_delay)) step = std::min(step, min_delay / 4.0);
    return std::max(step, horizon * 1e-7);
}

Rect parse_region(const Options& opt, const ValidatedSystem& vs) {
    if (!opt.region.empty()) {
        double re_min, re_max, im_max;
        if (std::sscanf(opt.region.c_str(), "%lf,%lf,%lf", &re_min, &re_max, &im_max) != 3) {
            std::cerr << "cannot parse --region (expected re_min,re_max,im_max)\n";
            throw CLI::RuntimeError(kExitInvalidInput);
        }
        return Rect{re_min, re_max, -im_max, im_max};
    }
    double cap = sigma_cap(vs) + 0.5;
    double omega = default_omega_max(vs);
    double lo = -(1.0 + 2.0 * sigma_cap(vs));
    // Keep the default region right of any Volterra transform pole.
    for (const auto& vt : vs.system().volterra_terms) {
        double d = vt.kernel.min_decay();
        if (std::isfinite(d)) lo = std::max(lo, -d + std::max(1e-3, 0.01 * d));
    }
    return Rect{lo, cap, -omega, omega};
}

fs::path out_path(const Options& opt, const std::string& name) {
    fs::create_directories(opt.out_dir);
    return fs::path(opt.out_dir) / name;
}

int cmd_simulate(const Options& opt) {
    Loaded in = load_and_validate(opt);
    double horizon = opt.horizon > 0.0 ? opt.horizon : std::max(20.0 * in.system.max_delay(), 20.0);
    double step = pick_step(opt, in.system, horizon);
    IntegrateOptions iopts;
    iopts.envelope_norm = parse_norm(opt.norm);

    Trajectory traj = in.perturbation
                          ? integrate_perturbed(in.system, *in.perturbation, in.history, horizon,
                                                step, iopts)
                          : integrate_limiting(in.system, in.history, horizon, step, iopts);

    auto csv = out_path(opt, "trajectory.csv");
    write_trajectory_csv(csv.string(), traj);

    Json summary{{"command", "simulate"},
                 {"horizon", horizon},
                 {"step", step},
                 {"perturbed", in.perturbation.has_value()},
                 {"final_time", traj.horizon()},
                 {"final_state", Json::array()},
                 {"final_norm", vec_norm(traj.eval(traj.horizon()), parse_norm(opt.norm))}};
    VectorXd xf = traj.eval(traj.horizon());
    for (Eigen::Index i = 0; i < xf.size(); ++i) summary["final_state"].push_back(xf(i));
    write_json_file(out_path(opt, "simulate.json").string(), summary);

    std::cout << "simulate: n=" << in.system.dim() << " horizon=" << format17(horizon)
              << " step=" << format17(step) << "\n"
              << "  |x(T)| = " << format17(summary["final_norm"].get<double>()) << "\n"
              << "  wrote " << csv.string() << "\n";
    return kExitOk;
}

int cmd_roots(const Options& opt) {
    Loaded in = load_and_validate(opt);
    Rect region = parse_region(opt, in.system);
    double tol = opt.tol > 0.0 ? opt.tol : 1e-10;
    RootSet rs = find_roots(in.system, region, tol);
    write_json_file(out_path(opt, "roots.json").string(), rootset_to_json(rs));
    std::cout << "roots: " << rs.roots.size() << " found in [" << format17(rs.region.re_min)
              << ", " << format17(rs.region.re_max) << "] x [" << format17(rs.region.im_min)
              << ", " << format17(rs.region.im_max) << "]"
              << (rs.exhaustive ? " (exhaustive)" : " (non-exhaustive)") << "\n";
    for (const auto& r : rs.roots)
        std::cout << "  " << format17(r.lambda.real()) << " + " << format17(r.lambda.imag())
                  << "i  mult=" << r.multiplicity << " residual=" << format17(r.residual) << "\n";
    std::cout << "abscissa: " << format17(rs.abscissa) << "\n";
    return kExitOk;
}

int cmd_certify(const Options& opt) {
    Loaded in = load_and_validate(opt);
    const DelaySystem& sys = in.system.system();
    std::vector<Certificate> certs;
    bool point_only = sys.volterra_terms.empty() && sys.finite_dist_terms.empty();
    if (point_only) {
        certs.push_back(certify_point_delay_independent(in.system));
        certs.push_back(abscissa_bound(in.system));
        certs.push_back(certify_remark43(in.system));
    } else if (sys.point_terms.size() == 2 && sys.volterra_terms.empty() &&
               sys.finite_dist_terms.size() == 1) {
        certs.push_back(certify_mixed(in.system));
    } else {
        std::cerr << "no certifier applies to this system shape (need point-only or "
                     "one point delay + one finite kernel)\n";
        throw CLI::RuntimeError(kExitInvalidInput);
    }

    Json out = Json::array();
    bool any = false;
    for (const auto& c : certs) {
        out.push_back(certificate_to_json(c));
        any = any || c.certified;
        std::cout << test_id_name(c.test_id) << ": "
                  << (c.certified ? "CERTIFIED" : "not certified") << "\n";
        for (const auto& [k, v] : c.values) std::cout << "    " << k << " = " << format17(v) << "\n";
        for (const auto& s : c.subs)
            std::cout << "    " << test_id_name(s.id) << ": "
                      << (s.certified ? "certified" : "not certified") << " gain=" << format17(s.gain)
                      << " sup=" << format17(s.resolvent_sup)
                      << " shift_margin=" << format17(s.shift_margin) << "\n";
        if (!c.notes.empty()) std::cout << "    note: " << c.notes << "\n";
    }
    write_json_file(out_path(opt, "certify.json").string(), out);
    return any ? kExitOk : kExitNegativeVerdict;
}

int cmd_exponent(const Options& opt) {
    Loaded in = load_and_validate(opt);
    double h = in.system.max_delay();
    double horizon = opt.horizon > 0.0 ? opt.horizon : std::max({40.0, 20.0 * h});
    double step = pick_step(opt, in.system, horizon);
    Norm norm = parse_norm(opt.norm);

    auto run = [&](double s) {
        return in.perturbation ? integrate_perturbed(in.system, *in.perturbation, in.history,
                                                     horizon, s)
                               : integrate_limiting(in.system, in.history, horizon, s);
    };
    Trajectory traj = run(step);
    ExponentFit fit = estimate_exponent(traj, h, 0.5, norm);
    Trajectory traj_half = run(step / 2.0);
    ExponentFit fit_half = estimate_exponent(traj_half, h, 0.5, norm);
    double agreement = std::abs(fit.mu_hat - fit_half.mu_hat);
    bool accepted = agreement <= 2.0 * std::max({fit.se_mu, fit_half.se_mu, 1e-9});

    Json out{{"command", "exponent"},
             {"fit", exponent_fit_to_json(fit)},
             {"fit_half_step", exponent_fit_to_json(fit_half)},
             {"half_step_agreement", agreement},
             {"accepted", accepted}};
    write_json_file(out_path(opt, "exponent.json").string(), out);

    std::ofstream csv(out_path(opt, "exponent.csv"));
    csv << "t,log_xt\n";
    for (double t = std::max(h, step); t <= traj.horizon(); t += std::max(step, horizon / 4000.0)) {
        double v = string_norm(traj, t, std::min(h, t), norm);
        csv << format17(t) << ',' << format17(v > 0 ? std::log(v) : -750.0) << "\n";
    }

    std::cout << "exponent: mu_hat = " << format17(fit.mu_hat) << " (se " << format17(fit.se_mu)
              << "), nu_hat = " << format17(fit.nu_hat) << ", r2 = " << format17(fit.r2) << "\n"
              << "  half-step agreement: " << format17(agreement)
              << (accepted ? " (accepted)" : " (NOT accepted)") << "\n";
    if (fit.oscillation_warning)
        std::cout << "  warning: dominant oscillation has < 3 periods in the fit window; "
                     "the slope is weakly identified\n";
    return kExitOk;
}

int cmd_compare(const Options& opt) {
    Loaded in = load_and_validate(opt);
    if (!in.perturbation) {
        std::cerr << "compare requires a perturbation block in the spec file\n";
        throw CLI::RuntimeError(kExitInvalidInput);
    }
    double horizon = opt.horizon > 0.0 ? opt.horizon
                                       : std::max(30.0, 20.0 * in.system.max_delay());
    CompareOptions copts;
    copts.step = opt.step;
    copts.norm = parse_norm(opt.norm);
    ComparisonReport rep = perron_compare(in.system, *in.perturbation, in.history, horizon, copts);
    write_json_file(out_path(opt, "compare.json").string(), comparison_report_to_json(rep));
    if (rep.trajectory && rep.fitted_eigensolution)
        write_compare_csv(out_path(opt, "compare.csv").string(), *rep.trajectory,
                          rep.fitted_eigensolution, in.system.max_delay(), copts.norm);

    // Window-integral admissibility of the same perturbation envelope.
    std::vector<SpectralRootRate> rates;
    AbscissaResult spec_roots = spectral_abscissa(in.system, -(1.0 + 2.0 * sigma_cap(in.system)));
    for (const auto& r : spec_roots.all.roots)
        rates.push_back({r.lambda.real(), r.multiplicity});
    HypothesisReport hyp = hypothesis_check(*in.perturbation, rates,
                                            in.system.has_volterra() ? 1 : 0, 30.0);
    write_json_file(out_path(opt, "hypothesis.json").string(), hypothesis_report_to_json(hyp));

    std::cout << "compare: mu = " << format17(rep.mu) << ", c_hat = (" << format17(rep.c_hat.real())
              << ", " << format17(rep.c_hat.imag()) << ")\n"
              << "  residual rate = " << format17(rep.residual_rate)
              << ", class = " << comparison_class_name(rep.classification)
              << ", gamma class = " << gamma_class_name(rep.gamma_class) << "\n"
              << "  hypothesis check: " << (hyp.pass ? "pass" : "fail") << "\n"
              << "  verdict: " << rep.verdict << "\n";
    return rep.verdict == "consistent" ? kExitOk : kExitNegativeVerdict;
}

int cmd_report(const Options& opt) {
    Loaded in = load_and_validate(opt);
    LoadedSpec echo;
    echo.system = in.system.system();
    echo.history = in.history;
    echo.perturbation = in.perturbation;
    write_json_file(out_path(opt, "system.json").string(), spec_to_json(echo));
    const DelaySystem& sys = in.system.system();
    std::cout << "report: n=" << sys.n << " point_terms=" << sys.point_terms.size()
              << " volterra=" << sys.volterra_terms.size()
              << " finite=" << sys.finite_dist_terms.size() << " h=" << format17(sys.h) << "\n"
              << "  sigma_cap=" << format17(sigma_cap(in.system))
              << " omega_default=" << format17(default_omega_max(in.system)) << "\n"
              << "  wrote " << out_path(opt, "system.json").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delay-spectra: simulation, spectra and stability certificates for linear delay systems"};
    app.require_subcommand(1);

    Options opt;
    auto* simulate = app.add_subcommand("simulate", "integrate the system and export the trajectory");
    auto* roots = app.add_subcommand("roots", "locate characteristic roots in a region");
    auto* certify = app.add_subcommand("certify", "run delay-independent stability certificates");
    auto* exponent = app.add_subcommand("exponent", "estimate the strict Lyapunov exponent");
    auto* compare = app.add_subcommand("compare", "compare against the dominant eigensolution");
    auto* report = app.add_subcommand("report", "validate and re-export the system spec");
    for (auto* cmd : {simulate, roots, certify, exponent, compare, report}) add_common(cmd, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (roots->parsed()) return cmd_roots(opt);
        if (certify->parsed()) return cmd_certify(opt);
        if (exponent->parsed()) return cmd_exponent(opt);
        if (compare->parsed()) return cmd_compare(opt);
        if (report->parsed()) return cmd_report(opt);
    } catch (const CLI::RuntimeError& e) {
        return e.get_exit_code();
    } catch (const EnvelopeViolation& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const SimulationError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const SpectrumError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const KernelPoleError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalidInput;
    }
    return kExitOk;
}
