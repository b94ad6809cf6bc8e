#include <doctest.h>

#include <cmath>
#include <random>

#include "delay_spectra/asymptotics.hpp"
#include "delay_spectra/certifiers.hpp"
#include "delay_spectra/simulator.hpp"

using namespace delay_spectra;

namespace {

ValidatedSystem scalar_system(double a0, double a1 = 0.0, double h = 0.0) {
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Constant(1, 1, a0), 0.0});
    if (h > 0.0) sys.point_terms.push_back({MatrixXd::Constant(1, 1, a1), h});
    return validate_system(sys).value();
}

HistoryFunction const_history(double v, double h, int n = 1) {
    return HistoryFunction::constant(VectorXd::Constant(n, v), h);
}

// Random stable one-delay suite shared by the coherence properties:
// entries U[-1,1], A0 shifted to be Hurwitz, h = 1.
std::vector<ValidatedSystem> random_stable_suite(int count, unsigned seed, int n = 2) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<ValidatedSystem> out;
    while (static_cast<int>(out.size()) < count) {
        MatrixXd a0(n, n), a1(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                a0(r, c) = u(rng);
                a1(r, c) = 0.3 * u(rng);
            }
        a0 -= (matrix_measure(a0) + 0.6) * MatrixXd::Identity(n, n);
        DelaySystem sys;
        sys.n = n;
        sys.point_terms.push_back({a0, 0.0});
        sys.point_terms.push_back({a1, 1.0});
        auto vs = validate_system(sys).value();
        AbscissaResult res = spectral_abscissa(vs, -8.0);
        if (!(res.mu < -0.1) || res.dominant.empty()) continue;
        bool simple = true;
        double dom_omega = 0.0;
        for (const auto& r : res.dominant) {
            simple &= (r.multiplicity == 1);
            dom_omega = std::max(dom_omega, std::abs(r.lambda.imag()));
        }
        if (!simple) continue;
        // A complex dominant pair must oscillate >= 3 times inside the
        // resolvable decay range, else the tail fit is ill-posed for any
        // estimator (the wiggle swamps the slope before the floor is hit).
        if (dom_omega > 1e-6 && 4.3 * dom_omega / std::abs(res.mu) < 3.0) continue;
        out.push_back(vs);
    }
    return out;
}

}  // namespace

TEST_CASE("exponent of a pure exponential") {
    Trajectory traj = Trajectory::tabulate(
        [](double t) { return VectorXd::Constant(1, std::exp(-t)); }, 0.0, 30.0, 0.01);
    ExponentFit fit = estimate_exponent(traj, 0.0);
    CHECK(std::abs(fit.mu_hat - (-1.0)) < 1e-3);
    CHECK(fit.nu_hat == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(fit.r2 > 0.999);
}

TEST_CASE("exponent of t e^{-2t} recovers rate and polynomial order") {
    Trajectory traj = Trajectory::tabulate(
        [](double t) { return VectorXd::Constant(1, t * std::exp(-2.0 * t)); }, 0.0, 30.0, 0.01);
    ExponentFit fit = estimate_exponent(traj, 0.0);
    CHECK(std::abs(fit.mu_hat - (-2.0)) < 1e-2);
    CHECK(std::abs(fit.nu_hat - 2.0) < 1e-2);
}

TEST_CASE("exponent of the simulated Lambert equation") {
    auto vs = scalar_system(0.0, -1.0, 1.0);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 1.0), 60.0, 0.01);
    ExponentFit fit = estimate_exponent(traj, 1.0);
    CHECK(std::abs(fit.mu_hat - (-0.3181315052047641)) < 5e-3);
}

TEST_CASE("exponent estimation rejects the zero solution and short windows") {
    Trajectory zero = Trajectory::tabulate(
        [](double) { return VectorXd::Zero(1); }, 0.0, 20.0, 0.01);
    CHECK_THROWS_AS(estimate_exponent(zero, 0.0), std::invalid_argument);

    auto vs = scalar_system(-1.0, 0.4, 1.0);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 1.0), 12.0, 0.01);
    CHECK_THROWS_AS(estimate_exponent(traj, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("gamma classification over the closed-form family") {
    PerturbationSpec p1;
    p1.gamma = {{1.0, 0, 1.0}};
    GammaClassification c1 = classify_gamma(p1, 1);
    CHECK(c1.cls == GammaClass::exp_decay_a);
    CHECK(c1.a == doctest::Approx(1.0));

    PerturbationSpec p2;
    p2.gamma = {{1.0, 1, 0.1}};
    GammaClassification c2 = classify_gamma(p2, 2);
    CHECK(c2.cls == GammaClass::exp_decay_a);
    CHECK(c2.a == doctest::Approx(0.1));

    PerturbationSpec p3;
    p3.gamma = {{0.3, 0, 0.0}};
    CHECK(classify_gamma(p3, 1).cls == GammaClass::bounded_only);

    PerturbationSpec p4;  // zero envelope decays faster than any exponential
    CHECK(classify_gamma(p4, 1).cls == GammaClass::exp_decay_a);
}

TEST_CASE("perron comparison on the separable scalar example") {
    auto vs = scalar_system(-1.0);
    PerturbationSpec pert;
    TimeVaryingMatrix tilde(1);
    tilde.at(0, 0) = {{1.0, 0, 2.0}};
    pert.tilde_point = {tilde};
    pert.gamma = {{1.0, 0, 2.0}};
    ComparisonReport rep =
        perron_compare(vs, pert, const_history(1.0, 0.0), 30.0);
    CHECK(rep.mu == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(rep.c_hat - Complex(std::exp(0.5), 0.0)) < 1e-3);
    CHECK(rep.residual_rate <= -2.5);
    CHECK(rep.classification == ComparisonClass::small_o_exp);
    CHECK(rep.epsilon_hat > 0.0);
    CHECK(rep.verdict == "consistent");
}

TEST_CASE("perron comparison with zero perturbation puts the residual at the floor") {
    auto vs = scalar_system(-1.0);
    PerturbationSpec pert;
    pert.gamma = {{0.0, 0, 1.0}};
    ComparisonReport rep = perron_compare(vs, pert, const_history(1.0, 0.0), 30.0);
    CHECK(rep.residual_below_floor);
    CHECK(rep.classification == ComparisonClass::small_o_exp);
    CHECK(rep.verdict == "consistent");
}

TEST_CASE("constant forcing: exponent 0 is not a characteristic real part") {
    auto vs = scalar_system(-1.0);
    PerturbationSpec pert;
    pert.f0.kind = ResidualTerm::Kind::constant;
    pert.f0.constant = VectorXd::Constant(1, 1.0);
    pert.f0.sup_bound = 1.0;
    pert.K0 = 1.0;
    ComparisonReport rep = perron_compare(vs, pert, const_history(0.5, 0.0), 40.0);
    CHECK(rep.mu_not_characteristic);
    CHECK(rep.classification == ComparisonClass::big_O_c);
    CHECK(std::abs(rep.solution_rate) < 0.02);
    CHECK(rep.mu == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(rep.verdict == "consistent");
}

TEST_CASE("verify_stability_verdict: exponential branch") {
    auto vs = scalar_system(-1.0);
    PerturbationSpec pert;
    std::vector<HistoryFunction> histories = {const_history(1.0, 0.0), const_history(-2.0, 0.0),
                                              const_history(0.3, 0.0)};
    StabilityVerdict v = verify_stability_verdict(vs, pert, histories, 30.0);
    CHECK(v.exponential_branch);
    CHECK(v.pass);
    for (const auto& ph : v.histories) CHECK(std::abs(ph.mu_hat - (-1.0)) < 0.05);
}

TEST_CASE("verify_stability_verdict: marginal oscillator stays bounded") {
    const double pi_half = 1.5707963267948966;
    auto vs = scalar_system(0.0, -pi_half, 1.0);
    PerturbationSpec pert;
    std::vector<HistoryFunction> histories = {const_history(1.0, 1.0), const_history(0.5, 1.0),
                                              const_history(-1.0, 1.0)};
    StabilityVerdict v = verify_stability_verdict(vs, pert, histories, 100.0);
    CHECK(!v.exponential_branch);  // mu = 0
    CHECK(v.bounded_branch);
    CHECK(v.pass);
}

TEST_CASE("verify_stability_verdict: constant forcing is bounded, not decaying") {
    auto vs = scalar_system(-1.0);
    PerturbationSpec pert;
    pert.f0.kind = ResidualTerm::Kind::constant;
    pert.f0.constant = VectorXd::Constant(1, 1.0);
    pert.f0.sup_bound = 1.0;
    pert.K0 = 1.0;
    std::vector<HistoryFunction> histories = {const_history(0.0, 0.0), const_history(2.0, 0.0),
                                              const_history(-1.0, 0.0)};
    StabilityVerdict v = verify_stability_verdict(vs, pert, histories, 40.0);
    CHECK(!v.exponential_branch);  // K0 > 0
    CHECK(v.bounded_branch);
    CHECK(v.pass);
}

TEST_CASE("exponent matches the abscissa for Volterra dynamics") {
    // x' = -int_0^t e^{-(t-u)} x(u) du: dominant pair (-1 +- i sqrt 3)/2.
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Zero(1, 1), 0.0});
    VolterraTerm vt;
    vt.A = MatrixXd::Constant(1, 1, -1.0);
    vt.kernel.kind = KernelKind::volterra;
    vt.kernel.density = {{1.0, 0, 1.0}};
    sys.volterra_terms.push_back(vt);
    auto vs = validate_system(sys).value();
    AbscissaResult res = spectral_abscissa(vs, -0.9);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 0.0), 40.0, 0.005);
    ExponentFit fit = estimate_exponent(traj, 0.0);
    CHECK(std::abs(fit.mu_hat - res.mu) <= 0.05);
    CHECK(res.mu == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("exponent/abscissa coherence on the random stable suite") {
    auto suite = random_stable_suite(10, 101);
    for (const auto& vs : suite) {
        AbscissaResult res = spectral_abscissa(vs, -8.0);
        double horizon = std::max(20.0, std::min(60.0, 30.0 / std::abs(res.mu)));
        Trajectory traj =
            integrate_limiting(vs, const_history(1.0, 1.0, vs.dim()), horizon, 0.01);
        ExponentFit fit = estimate_exponent(traj, 1.0);
        CHECK(std::abs(fit.mu_hat - res.mu) <= 0.05);
    }
}

TEST_CASE("exponent estimates are norm independent within 2 standard errors") {
    auto suite = random_stable_suite(5, 202);
    for (const auto& vs : suite) {
        AbscissaResult res = spectral_abscissa(vs, -8.0);
        double horizon = std::max(20.0, std::min(60.0, 30.0 / std::abs(res.mu)));
        Trajectory traj =
            integrate_limiting(vs, const_history(1.0, 1.0, vs.dim()), horizon, 0.01);
        ExponentFit f1 = estimate_exponent(traj, 1.0, 0.5, Norm::l1);
        ExponentFit f2 = estimate_exponent(traj, 1.0, 0.5, Norm::l2);
        ExponentFit fi = estimate_exponent(traj, 1.0, 0.5, Norm::linf);
        double tol12 = 2.0 * std::max(f1.se_mu, f2.se_mu) + 1e-6;  // absolute floor for near-exact fits
        double tol2i = 2.0 * std::max(f2.se_mu, fi.se_mu) + 1e-6;  // absolute floor for near-exact fits
        CHECK(std::abs(f1.mu_hat - f2.mu_hat) <= tol12);
        CHECK(std::abs(f2.mu_hat - fi.mu_hat) <= tol2i);
    }
}

TEST_CASE("perron margin holds on the random stable suite") {
    auto suite = random_stable_suite(10, 303);
    int ok = 0;
    for (const auto& vs : suite) {
        AbscissaResult res = spectral_abscissa(vs, -8.0);
        PerturbationSpec pert;
        TimeVaryingMatrix tilde(vs.dim());
        for (int r = 0; r < vs.dim(); ++r) tilde.at(r, r) = {{0.5, 0, 2.0}};
        pert.tilde_point = {tilde, TimeVaryingMatrix::zero(vs.dim())};
        pert.gamma = {{1.0, 0, 2.0}};
        double horizon = std::max(25.0, std::min(60.0, 30.0 / std::abs(res.mu)));
        try {
            ComparisonReport rep =
                perron_compare(vs, pert, const_history(1.0, 1.0, vs.dim()), horizon);
            if (rep.residual_below_floor ||
                rep.residual_rate <= rep.mu + std::min(-0.1, -rep.epsilon_hat))
                ++ok;
        } catch (const SpectrumError&) {
        }
    }
    CHECK(ok >= 9);
}

TEST_CASE("shrinking gamma never worsens the residual rate beyond fit noise") {
    auto suite = random_stable_suite(4, 404);
    for (const auto& vs : suite) {
        AbscissaResult res = spectral_abscissa(vs, -8.0);
        double horizon = std::max(25.0, std::min(60.0, 30.0 / std::abs(res.mu)));
        auto run = [&](double scale) {
            PerturbationSpec pert;
            TimeVaryingMatrix tilde(vs.dim());
            for (int r = 0; r < vs.dim(); ++r) tilde.at(r, r) = {{0.5 * scale, 0, 2.0}};
            pert.tilde_point = {tilde, TimeVaryingMatrix::zero(vs.dim())};
            pert.gamma = {{scale, 0, 2.0}};
            return perron_compare(vs, pert, const_history(1.0, 1.0, vs.dim()), horizon);
        };
        ComparisonReport big = run(1.0);
        ComparisonReport small = run(0.1);
        if (big.residual_below_floor || small.residual_below_floor) continue;
        double noise = 2.0 * (big.residual_fit.se_mu + small.residual_fit.se_mu) + 0.05;
        CHECK(small.residual_rate <= big.residual_rate + noise);
    }
}
