#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "delay_spectra/simulator.hpp"

using namespace delay_spectra;

namespace {

ValidatedSystem make_scalar(double a0, double a1 = 0.0, double h = 0.0) {
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Constant(1, 1, a0), 0.0});
    if (h > 0.0) sys.point_terms.push_back({MatrixXd::Constant(1, 1, a1), h});
    return validate_system(sys).value();
}

ValidatedSystem make_matrix_system(const MatrixXd& a0) {
    DelaySystem sys;
    sys.n = static_cast<int>(a0.rows());
    sys.point_terms.push_back({a0, 0.0});
    return validate_system(sys).value();
}

HistoryFunction const_history(double value, double h, int n = 1) {
    return HistoryFunction::constant(VectorXd::Constant(n, value), h);
}

}  // namespace

TEST_CASE("pure decay reproduces exp(-1) at t = 1") {
    auto vs = make_scalar(-1.0);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 0.0), 1.0, 1e-3);
    CHECK(std::abs(traj.eval(1.0)(0) - std::exp(-1.0)) < 1e-8);
}

TEST_CASE("method-of-steps closed form: x(1) = 0 and x(2) = -1/2") {
    auto vs = make_scalar(0.0, -1.0, 1.0);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 1.0), 2.0, 1e-4);
    CHECK(std::abs(traj.eval(1.0)(0) - 0.0) < 1e-8);
    CHECK(std::abs(traj.eval(2.0)(0) - (-0.5)) < 1e-8);
}

TEST_CASE("zero solution is preserved by a pure Volterra term") {
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Zero(1, 1), 0.0});
    VolterraTerm vt;
    vt.A = MatrixXd::Constant(1, 1, -1.0);
    vt.kernel.kind = KernelKind::volterra;
    vt.kernel.density = {{1.0, 0, 1.0}};
    sys.volterra_terms.push_back(vt);
    auto vs = validate_system(sys).value();
    Trajectory traj = integrate_limiting(vs, const_history(0.0, 0.0), 2.0, 1e-2);
    for (double t = 0.0; t <= 2.0; t += 0.25) CHECK(traj.eval(t)(0) == 0.0);
}

TEST_CASE("Volterra dynamics match the equivalent ODE pair") {
    // x'(t) = -int_0^t e^{-(t-u)} x(u) du is equivalent to x' = -g, g' = x - g.
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Zero(1, 1), 0.0});
    VolterraTerm vt;
    vt.A = MatrixXd::Constant(1, 1, -1.0);
    vt.kernel.kind = KernelKind::volterra;
    vt.kernel.density = {{1.0, 0, 1.0}};
    sys.volterra_terms.push_back(vt);
    auto vs = validate_system(sys).value();
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 0.0), 5.0, 1e-3);

    MatrixXd a(2, 2);
    a << 0.0, -1.0, 1.0, -1.0;
    Eigen::VectorXd z0(2);
    z0 << 1.0, 0.0;
    for (double t : {1.0, 2.5, 5.0}) {
        Eigen::VectorXd z = (a * t).exp() * z0;
        CHECK(std::abs(traj.eval(t)(0) - z(0)) < 1e-5);
    }
}

TEST_CASE("finite-distributed kernel: x'' = 1 - x closed form on the first interval") {
    // x'(t) = -int_{t-1}^t x(u) du with phi = 1 gives x(t) = 1 - sin t on [0, 1].
    DelaySystem sys;
    sys.n = 1;
    sys.point_terms.push_back({MatrixXd::Zero(1, 1), 0.0});
    FiniteDistTerm ft;
    ft.A = MatrixXd::Constant(1, 1, -1.0);
    ft.span = 1.0;
    ft.kernel.kind = KernelKind::finite;
    ft.kernel.support_bound = 1.0;
    ft.kernel.density = {{1.0, 0, 0.0}};
    sys.finite_dist_terms.push_back(ft);
    auto vs = validate_system(sys).value();
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 1.0), 1.0, 1e-3);
    CHECK(std::abs(traj.eval(0.5)(0) - (1.0 - std::sin(0.5))) < 1e-5);
    CHECK(std::abs(traj.eval(1.0)(0) - (1.0 - std::sin(1.0))) < 1e-5);
}

TEST_CASE("zero perturbation reproduces the limiting run bitwise") {
    auto vs = make_scalar(-0.8, 0.4, 1.0);
    HistoryFunction hist = const_history(1.0, 1.0);
    Trajectory lim = integrate_limiting(vs, hist, 5.0, 0.01);
    PerturbationSpec pert;  // all zero
    Trajectory per = integrate_perturbed(vs, pert, hist, 5.0, 0.01);
    REQUIRE(lim.times().size() == per.times().size());
    for (size_t i = 0; i < lim.times().size(); ++i)
        CHECK(lim.samples()[i](0) == per.samples()[i](0));
}

TEST_CASE("separable time-varying perturbation has the closed-form solution") {
    // x' = (-1 + e^{-2t}) x with x(0) = 1: x(t) = exp(-t + (1 - e^{-2t})/2).
    auto vs = make_scalar(-1.0);
    PerturbationSpec pert;
    TimeVaryingMatrix tilde(1);
    tilde.at(0, 0) = {{1.0, 0, 2.0}};
    pert.tilde_point = {tilde};
    pert.gamma = {{1.0, 0, 2.0}};
    Trajectory traj = integrate_perturbed(vs, pert, const_history(1.0, 0.0), 5.0, 1e-3);
    double expected = std::exp(-5.0 + (1.0 - std::exp(-10.0)) / 2.0);
    CHECK(std::abs(traj.eval(5.0)(0) - expected) < 1e-7);
}

TEST_CASE("constant forcing settles at the fixed point") {
    auto vs = make_scalar(-1.0);
    PerturbationSpec pert;
    pert.f0.kind = ResidualTerm::Kind::constant;
    pert.f0.constant = VectorXd::Constant(1, 1.0);
    pert.f0.sup_bound = 1.0;
    pert.K0 = 1.0;
    Trajectory traj = integrate_perturbed(vs, pert, const_history(0.0, 0.0), 20.0, 1e-2);
    CHECK(std::abs(traj.eval(20.0)(0) - 1.0) < 1e-6);
}

TEST_CASE("perturbation_value examples") {
    auto vs = make_scalar(-1.0);
    Trajectory traj = integrate_limiting(vs, const_history(1.0, 0.0), 2.0, 1e-2);

    PerturbationSpec zero;
    CHECK(perturbation_value(zero, vs, 1.0, traj)(0) == 0.0);

    // tilde A0(t) = e^{-t} I against a constant trajectory at t = 0 gives 1.
    PerturbationSpec p1;
    TimeVaryingMatrix t1(1);
    t1.at(0, 0) = {{1.0, 0, 1.0}};
    p1.tilde_point = {t1};
    Trajectory cones = Trajectory::tabulate(
        [](double) { return VectorXd::Constant(1, 1.0); }, 0.0, 2.0, 0.01);
    CHECK(perturbation_value(p1, vs, 0.0, cones)(0) == doctest::Approx(1.0));

    // tilde A0(t) = e^{-2t} against x(t) = e^{-t} at t = 1 gives e^{-3}.
    PerturbationSpec p2;
    TimeVaryingMatrix t2(1);
    t2.at(0, 0) = {{1.0, 0, 2.0}};
    p2.tilde_point = {t2};
    Trajectory decay = Trajectory::tabulate(
        [](double t) { return VectorXd::Constant(1, std::exp(-t)); }, 0.0, 2.0, 0.01);
    CHECK(perturbation_value(p2, vs, 1.0, decay)(0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-9));

    CHECK_THROWS_AS(perturbation_value(p2, vs, 5.0, decay), std::out_of_range);
}

TEST_CASE("string norm examples") {
    Trajectory constant = Trajectory::tabulate(
        [](double) { return VectorXd::Constant(1, 3.0); }, 0.0, 4.0, 0.01);
    CHECK(string_norm(constant, 2.0, 1.0) == doctest::Approx(3.0));

    Trajectory decay = Trajectory::tabulate(
        [](double t) { return VectorXd::Constant(1, std::exp(-t)); }, 0.0, 4.0, 0.01);
    CHECK(string_norm(decay, 2.0, 1.0, Norm::linf) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

    Trajectory wave = Trajectory::tabulate(
        [](double t) { return VectorXd::Constant(1, std::sin(3.14159265358979323846 * t)); }, 0.0,
        2.0, 0.001);
    CHECK(string_norm(wave, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("step-halving error ratio is near 16 on smooth segments") {
    // Delay-free rotation + decay, measured at t = 5.
    MatrixXd a(2, 2);
    a << -0.3, 1.0, -1.0, -0.3;
    auto vs = make_matrix_system(a);
    HistoryFunction hist = HistoryFunction::constant((VectorXd(2) << 1.0, 0.5).finished(), 0.0);
    Eigen::VectorXd exact = (a * 5.0).exp() * hist.terminal_value();
    double e1 = (integrate_limiting(vs, hist, 5.0, 0.1).eval(5.0) - exact).norm();
    double e2 = (integrate_limiting(vs, hist, 5.0, 0.05).eval(5.0) - exact).norm();
    double ratio = e1 / e2;
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);

    // Point delay with grid-aligned breakpoints, reference at step/8.
    auto dde = make_scalar(-0.5, -0.8, 1.0);
    HistoryFunction h1 = const_history(1.0, 1.0);
    VectorXd ref = integrate_limiting(dde, h1, 2.5, 0.0125).eval(2.5);
    double d1 = std::abs(integrate_limiting(dde, h1, 2.5, 0.1).eval(2.5)(0) - ref(0));
    double d2 = std::abs(integrate_limiting(dde, h1, 2.5, 0.05).eval(2.5)(0) - ref(0));
    double dratio = d1 / d2;
    CHECK(dratio > 12.0);
    CHECK(dratio < 20.0);
}

TEST_CASE("linearity and superposition of the limiting equation") {
    auto vs = make_scalar(-0.4, -0.6, 1.0);
    HistoryFunction h1 = const_history(1.0, 1.0);
    MatrixXd ramp(1, 4);
    ramp << 1.0, 0.5, 0.0, 0.0;
    HistoryFunction h2({-1.0, 0.0}, {ramp}, VectorXd::Constant(1, 1.5));

    Trajectory x1 = integrate_limiting(vs, h1, 6.0, 0.01);
    Trajectory x2 = integrate_limiting(vs, h2, 6.0, 0.01);

    HistoryFunction h3 = HistoryFunction::constant(VectorXd::Constant(1, 3.0), 1.0);
    Trajectory x3 = integrate_limiting(vs, h3, 6.0, 0.01);
    for (double t : {1.0, 3.0, 6.0})
        CHECK(x3.eval(t)(0) == doctest::Approx(3.0 * x1.eval(t)(0)).epsilon(1e-9));

    MatrixXd sum_piece(1, 4);
    sum_piece << 2.0, 0.5, 0.0, 0.0;
    HistoryFunction hsum({-1.0, 0.0}, {sum_piece}, VectorXd::Constant(1, 2.5));
    Trajectory xs = integrate_limiting(vs, hsum, 6.0, 0.01);
    for (double t : {1.0, 3.0, 6.0})
        CHECK(xs.eval(t)(0) ==
              doctest::Approx(x1.eval(t)(0) + x2.eval(t)(0)).epsilon(1e-9));
}

TEST_CASE("delay-free system matches the matrix exponential") {
    MatrixXd a(3, 3);
    a << -1.0, 0.5, 0.0, -0.2, -2.0, 0.3, 0.1, 0.0, -0.7;
    auto vs = make_matrix_system(a);
    VectorXd x0(3);
    x0 << 1.0, -0.5, 0.25;
    HistoryFunction hist = HistoryFunction::constant(x0, 0.0);
    Trajectory traj = integrate_limiting(vs, hist, 10.0, 1e-3);
    Eigen::VectorXd exact = (a * 10.0).exp() * x0;
    CHECK((traj.eval(10.0) - exact).norm() < 1e-6);
}

TEST_CASE("blow-up is reported with its time") {
    auto vs = make_scalar(40.0);
    try {
        integrate_limiting(vs, const_history(1.0, 0.0), 20.0, 1e-2);
        FAIL("expected blow-up");
    } catch (const SimulationError& e) {
        CHECK(e.time > 0.0);
        CHECK(e.time <= 20.0);
    }
}

TEST_CASE("step preconditions are enforced") {
    auto vs = make_scalar(-1.0, 0.5, 0.1);
    CHECK_THROWS_AS(integrate_limiting(vs, const_history(1.0, 0.1), 1.0, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(integrate_limiting(vs, const_history(1.0, 0.1), -1.0, 0.01),
                    std::invalid_argument);
}

TEST_CASE("envelope violation is detected") {
    auto vs = make_scalar(-1.0);
    PerturbationSpec pert;
    TimeVaryingMatrix tilde(1);
    tilde.at(0, 0) = {{1.0, 0, 0.5}};
    pert.tilde_point = {tilde};
    pert.gamma = {{0.1, 0, 0.5}};  // declared envelope too small by 10x
    CHECK_THROWS_AS(integrate_perturbed(vs, pert, const_history(1.0, 0.0), 2.0, 1e-2),
                    EnvelopeViolation);
}

TEST_CASE("envelope soundness: completed runs stay within gamma |x_t| + K0") {
    auto vs = make_scalar(-1.0, 0.3, 1.0);
    PerturbationSpec pert;
    TimeVaryingMatrix tilde(1);
    tilde.at(0, 0) = {{0.5, 0, 2.0}};
    pert.tilde_point = {tilde, TimeVaryingMatrix::zero(1)};
    pert.gamma = {{0.5, 0, 2.0}};
    HistoryFunction hist = const_history(1.0, 1.0);
    Trajectory traj = integrate_perturbed(vs, pert, hist, 10.0, 0.01);
    const auto& realized = traj.realized_perturbation_norms();
    REQUIRE(!realized.empty());
    for (size_t i = 0; i < realized.size(); ++i) {
        double t = traj.times()[i];
        double xt = string_norm(traj, t, 1.0);
        CHECK(realized[i] <= pert.gamma_eval(t) * xt + pert.K0 + 1e-9 * (1.0 + xt));
    }
}

TEST_CASE("hypothesis check: decaying gamma passes, constant gamma fails") {
    PerturbationSpec decaying;
    decaying.gamma = {{1.0, 0, 1.0}};
    HypothesisReport r1 = hypothesis_check(decaying, {{-1.0, 1}}, 0, 30.0);
    CHECK(r1.pass);
    // Window integral is e^{-t}(1 - e^{-1}); spot-check the first window.
    CHECK(r1.roots[0].window_integrals[0] ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));

    PerturbationSpec constant;
    constant.gamma = {{1.0, 0, 0.0}};
    HypothesisReport r2 = hypothesis_check(constant, {{-0.5, 1}}, 0, 30.0);
    CHECK(!r2.pass);
    CHECK(r2.roots[0].window_integrals[0] == doctest::Approx(1.0).epsilon(1e-12));

    PerturbationSpec fast;
    fast.gamma = {{1.0, 0, 3.0}};
    HypothesisReport r3 = hypothesis_check(fast, {{2.0, 1}}, 1, 30.0);
    CHECK(r3.pass);
    // Integrand reduces to e^{-s}: first window integral e^0 - e^{-1} scaled.
    CHECK(r3.roots[0].window_integrals[0] ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("hypothesis check reports overflow for growing integrands") {
    PerturbationSpec slow;
    slow.gamma = {{1.0, 0, 0.1}};
    HypothesisReport r = hypothesis_check(slow, {{5.0, 1}}, 1, 400.0);
    CHECK(!r.pass);
    CHECK(r.roots[0].overflow);
}

TEST_CASE("indicator averages use the positive part of gamma - K0") {
    PerturbationSpec pert;
    pert.gamma = {{1.0, 0, 1.0}};
    pert.K0 = 0.5;
    HypothesisReport r = hypothesis_check(pert, {{-1.0, 1}}, 0, 5.0);
    // gamma(t) = e^{-t} crosses K0 = 1/2 at t = ln 2: the first window holds
    // int_0^{ln 2} (e^{-s} - 1/2) ds = 1/2 - ln(2)/2.
    CHECK(r.indicator_averages[0] ==
          doctest::Approx(0.5 - 0.5 * std::log(2.0)).epsilon(1e-9));
    CHECK(r.indicator_averages[3] == doctest::Approx(0.0));
}
