#include "delay_spectra/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace delay_spectra {

std::vector<std::string> KernelSpec::validate() const {
    std::vector<std::string> errors;
    if (kind == KernelKind::volterra) {
        for (const auto& t : density)
            if (t.c != 0.0 && t.d <= 0.0)
                errors.push_back("non-integrable Volterra kernel: density term with decay rate d = " +
                                 std::to_string(t.d) + " <= 0");
        for (const auto& a : atoms)
            if (a.tau < 0.0) errors.push_back("Volterra kernel atom at negative location");
    } else {
        if (!(support_bound > 0.0))
            errors.push_back("finite kernel requires support_bound > 0");
        for (const auto& a : atoms)
            if (a.tau < 0.0 || a.tau > support_bound)
                errors.push_back("finite kernel atom at tau = " + std::to_string(a.tau) +
                                 " outside [0, support_bound]");
    }
    for (const auto& t : density)
        if (t.k < 0) errors.push_back("density term with negative power");
    return errors;
}

double KernelSpec::total_variation() const {
    double tv = 0.0;
    for (const auto& a : atoms) tv += std::abs(a.w);
    double upper = kind == KernelKind::volterra ? std::numeric_limits<double>::infinity()
                                                : support_bound;
    for (const auto& t : density) {
        ExpPolyTerm abs_term{std::abs(t.c), t.k, t.d};
        tv += exp_poly_term_integral(abs_term, 0.0, upper);
    }
    return tv;
}

Complex KernelSpec::transform_alpha(Complex s) const {
    if (std::abs(s) < 1e-14)
        throw SingularPointError("transform of alpha singular at s = 0");
    return (transform_dalpha<Complex>(s) + Complex(alpha_at_zero)) / s;
}

double KernelSpec::measure(double a, double b) const {
    if (a > b) throw std::invalid_argument("kernel measure: a > b");
    if (kind == KernelKind::finite) {
        if (a < -1e-12 || b > support_bound + 1e-12)
            throw std::invalid_argument("kernel measure: interval outside finite kernel support");
    } else if (a < -1e-12) {
        throw std::invalid_argument("kernel measure: interval outside kernel support");
    }
    double m = 0.0;
    for (const auto& atom : atoms)
        if (atom.tau >= a && atom.tau < b) m += atom.w;
    m += exp_poly_integral(density, a, b);
    return m;
}

double KernelSpec::full_mass() const {
    if (kind == KernelKind::volterra)
        return measure(0.0, std::numeric_limits<double>::infinity());
    double m = 0.0;
    for (const auto& atom : atoms) m += atom.w;  // right-end atoms included
    m += exp_poly_integral(density, 0.0, support_bound);
    return m;
}

}  // namespace delay_spectra
