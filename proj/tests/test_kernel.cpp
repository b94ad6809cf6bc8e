#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "delay_spectra/kernel.hpp"

using namespace delay_spectra;

namespace {

// Independent Simpson oracle for int_a^b density(t) dt.
double simpson_density(const std::vector<ExpPolyTerm>& terms, double a, double b, int n = 20000) {
    auto f = [&](double t) { return eval_exp_poly(terms, t); };
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + (b - a) * i / n);
    return s * (b - a) / (3.0 * n);
}

KernelSpec volterra_density(double c, int k, double d) {
    KernelSpec ks;
    ks.kind = KernelKind::volterra;
    ks.density = {{c, k, d}};
    return ks;
}

}  // namespace

TEST_CASE("transform of a unit atom at the origin is 1") {
    KernelSpec ks;
    ks.kind = KernelKind::volterra;
    ks.atoms = {{0.0, 1.0}};
    CHECK(ks.transform_dalpha<Complex>(Complex(3.0, 0.0)) == Complex(1.0, 0.0));
}

TEST_CASE("transform of exp(-2t) density at s = 0 is 1/2") {
    KernelSpec ks = volterra_density(1.0, 0, 2.0);
    Complex v = ks.transform_dalpha<Complex>(Complex(0.0, 0.0));
    CHECK(std::abs(v - Complex(0.5, 0.0)) < 1e-14);
}

TEST_CASE("transform of t exp(-t) density at s = 1 is 1/4") {
    KernelSpec ks = volterra_density(1.0, 1, 1.0);
    Complex v = ks.transform_dalpha<Complex>(Complex(1.0, 0.0));
    CHECK(std::abs(v - Complex(0.25, 0.0)) < 1e-14);
}

TEST_CASE("transform pole is reported, not evaluated") {
    KernelSpec ks = volterra_density(1.0, 0, 2.0);
    CHECK_THROWS_AS(ks.transform_dalpha<Complex>(Complex(-2.0, 0.0)), KernelPoleError);
    CHECK_THROWS_AS(ks.transform_alpha(Complex(0.0, 0.0)), SingularPointError);
}

TEST_CASE("alpha transform uses (dalpha + alpha(0))/s") {
    KernelSpec ks = volterra_density(1.0, 0, 2.0);
    ks.alpha_at_zero = 0.25;
    Complex s(1.5, 0.7);
    Complex expected = (ks.transform_dalpha<Complex>(s) + Complex(0.25)) / s;
    CHECK(std::abs(ks.transform_alpha(s) - expected) < 1e-15);
}

TEST_CASE("finite kernel transform truncates at the support bound") {
    KernelSpec ks;
    ks.kind = KernelKind::finite;
    ks.support_bound = 1.0;
    ks.density = {{1.0, 0, 0.0}};
    // int_0^1 e^{-st} dt = (1 - e^{-s})/s
    Complex s(0.8, -0.3);
    Complex expected = (Complex(1.0) - std::exp(-s)) / s;
    CHECK(std::abs(ks.transform_dalpha<Complex>(s) - expected) < 1e-13);
    // s = 0 is regular for the truncated transform.
    CHECK(std::abs(ks.transform_dalpha<Complex>(Complex(0.0)) - Complex(1.0)) < 1e-13);
}

TEST_CASE("incomplete integral recursion matches a quadrature oracle") {
    std::vector<ExpPolyTerm> terms = {{0.7, 2, 1.3}, {-0.2, 0, 0.4}, {0.05, 3, 2.1}};
    for (double a : {0.0, 0.5, 2.0}) {
        for (double b : {0.6, 3.0, 8.0}) {
            if (b <= a) continue;
            double oracle = simpson_density(terms, a, b);
            CHECK(exp_poly_integral(terms, a, b) == doctest::Approx(oracle).epsilon(1e-9));
        }
    }
}

TEST_CASE("measure: atom inclusion and zero-length intervals") {
    KernelSpec ks;
    ks.kind = KernelKind::finite;
    ks.support_bound = 1.0;
    ks.atoms = {{0.5, 2.0}};
    CHECK(ks.measure(0.0, 1.0) == 2.0);
    CHECK(ks.measure(0.5, 0.5) == 0.0);  // [a, a) is empty even with an atom at a
    CHECK(ks.measure(0.6, 1.0) == 0.0);
}

TEST_CASE("measure outside a finite kernel support is an error") {
    KernelSpec ks;
    ks.kind = KernelKind::finite;
    ks.support_bound = 1.0;
    ks.density = {{1.0, 0, 0.0}};
    CHECK_THROWS_AS(ks.measure(0.5, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(ks.measure(0.8, 0.2), std::invalid_argument);
}

TEST_CASE("measure of exp(-t) density over [0, inf) is 1") {
    KernelSpec ks = volterra_density(1.0, 0, 1.0);
    CHECK(ks.measure(0.0, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("measure is additive over adjacent intervals") {
    std::mt19937 rng(61);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    KernelSpec ks;
    ks.kind = KernelKind::volterra;
    ks.density = {{1.2, 1, 0.9}, {-0.3, 0, 2.0}};
    ks.atoms = {{0.4, 1.5}, {1.1, -0.2}};
    for (int trial = 0; trial < 50; ++trial) {
        double x[3] = {u(rng), u(rng), u(rng)};
        std::sort(x, x + 3);
        bool atom_at_mid = false;
        for (const auto& atom : ks.atoms)
            if (atom.tau == x[1]) atom_at_mid = true;
        if (atom_at_mid) continue;
        double whole = ks.measure(x[0], x[2]);
        double split = ks.measure(x[0], x[1]) + ks.measure(x[1], x[2]);
        CHECK(whole == doctest::Approx(split).epsilon(1e-12));
    }
}

TEST_CASE("transform is linear in the kernel terms") {
    KernelSpec a = volterra_density(0.8, 1, 1.1);
    KernelSpec b = volterra_density(-0.4, 0, 2.3);
    KernelSpec sum = a;
    sum.density.push_back(b.density[0]);
    sum.atoms = {{0.3, 0.7}};
    KernelSpec atom_only;
    atom_only.kind = KernelKind::volterra;
    atom_only.atoms = {{0.3, 0.7}};
    for (Complex s : {Complex(0.5, 1.0), Complex(-0.2, 3.0), Complex(2.0, -0.5)}) {
        Complex lhs = sum.transform_dalpha<Complex>(s);
        Complex rhs = a.transform_dalpha<Complex>(s) + b.transform_dalpha<Complex>(s) +
                      atom_only.transform_dalpha<Complex>(s);
        CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(rhs)));
    }
}

TEST_CASE("Volterra measure converges to the dalpha transform at s -> 0+") {
    KernelSpec ks;
    ks.kind = KernelKind::volterra;
    ks.density = {{2.0, 0, 0.8}, {0.5, 2, 1.6}};
    ks.atoms = {{0.2, 0.4}};
    double min_d = ks.min_decay();
    double t_cap = 50.0 / min_d;
    double measured = ks.measure(0.0, t_cap);
    double transform0 = ks.transform_dalpha<Complex>(Complex(1e-12, 0.0)).real();
    CHECK(measured == doctest::Approx(transform0).epsilon(1e-8));
}

TEST_CASE("total variation is exact for single-signed terms") {
    KernelSpec ks = volterra_density(2.0, 0, 4.0);
    ks.atoms = {{0.1, -3.0}};
    CHECK(ks.total_variation() == doctest::Approx(3.0 + 2.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("kernel validation rejects non-integrable Volterra densities") {
    KernelSpec ks = volterra_density(1.0, 0, 0.0);
    auto errs = ks.validate();
    REQUIRE(!errs.empty());
    CHECK(errs.front().find("non-integrable") != std::string::npos);

    KernelSpec fin;
    fin.kind = KernelKind::finite;
    fin.support_bound = 1.0;
    fin.atoms = {{1.5, 1.0}};
    errs = fin.validate();
    REQUIRE(!errs.empty());
    CHECK(errs.front().find("outside") != std::string::npos);
}

TEST_CASE("dual-number transform derivative matches finite differences") {
    KernelSpec ks = volterra_density(1.3, 2, 1.7);
    ks.atoms = {{0.5, 0.9}};
    Complex s(0.4, 1.2);
    CDual r = ks.transform_dalpha<CDual>(CDual::variable(s));
    double eps = 1e-6;
    Complex fd = (ks.transform_dalpha<Complex>(s + Complex(eps)) -
                  ks.transform_dalpha<Complex>(s - Complex(eps))) /
                 (2.0 * eps);
    CHECK(std::abs(r.v - ks.transform_dalpha<Complex>(s)) < 1e-14);
    CHECK(std::abs(r.d - fd) < 1e-7);
}

TEST_CASE("finite kernel dual transform derivative matches finite differences") {
    KernelSpec ks;
    ks.kind = KernelKind::finite;
    ks.support_bound = 2.0;
    ks.density = {{0.9, 1, 0.6}};
    Complex s(0.3, -0.8);
    CDual r = ks.transform_dalpha<CDual>(CDual::variable(s));
    double eps = 1e-6;
    Complex fd = (ks.transform_dalpha<Complex>(s + Complex(eps)) -
                  ks.transform_dalpha<Complex>(s - Complex(eps))) /
                 (2.0 * eps);
    CHECK(std::abs(r.d - fd) < 1e-7);
}
