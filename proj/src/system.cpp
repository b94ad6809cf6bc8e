#include "delay_spectra/system.hpp"

#include <algorithm>
#include <cmath>

namespace delay_spectra {

bool DelaySystem::operator==(const DelaySystem& o) const {
    auto kernel_eq = [](const KernelSpec& a, const KernelSpec& b) {
        if (a.kind != b.kind || a.support_bound != b.support_bound ||
            a.alpha_at_zero != b.alpha_at_zero)
            return false;
        if (a.density.size() != b.density.size() || a.atoms.size() != b.atoms.size()) return false;
        for (size_t i = 0; i < a.density.size(); ++i)
            if (a.density[i].c != b.density[i].c || a.density[i].k != b.density[i].k ||
                a.density[i].d != b.density[i].d)
                return false;
        for (size_t i = 0; i < a.atoms.size(); ++i)
            if (a.atoms[i].tau != b.atoms[i].tau || a.atoms[i].w != b.atoms[i].w) return false;
        return true;
    };
    if (n != o.n || h != o.h) return false;
    if (point_terms.size() != o.point_terms.size() ||
        volterra_terms.size() != o.volterra_terms.size() ||
        finite_dist_terms.size() != o.finite_dist_terms.size())
        return false;
    for (size_t i = 0; i < point_terms.size(); ++i)
        if (point_terms[i].h != o.point_terms[i].h || point_terms[i].A != o.point_terms[i].A)
            return false;
    for (size_t i = 0; i < volterra_terms.size(); ++i)
        if (volterra_terms[i].shift != o.volterra_terms[i].shift ||
            volterra_terms[i].A != o.volterra_terms[i].A ||
            !kernel_eq(volterra_terms[i].kernel, o.volterra_terms[i].kernel))
            return false;
    for (size_t i = 0; i < finite_dist_terms.size(); ++i)
        if (finite_dist_terms[i].span != o.finite_dist_terms[i].span ||
            finite_dist_terms[i].A != o.finite_dist_terms[i].A ||
            !kernel_eq(finite_dist_terms[i].kernel, o.finite_dist_terms[i].kernel))
            return false;
    return true;
}

std::string ValidationResult::joined() const {
    std::string s;
    for (const auto& e : errors) {
        if (!s.empty()) s += "; ";
        s += e;
    }
    return s;
}

ValidationResult validate_system(const DelaySystem& raw) {
    ValidationResult result;
    auto& errors = result.errors;

    if (raw.n < 1) errors.push_back("state dimension must be >= 1");

    DelaySystem sys = raw;

    auto check_matrix = [&](const MatrixXd& a, const std::string& where) {
        if (a.rows() != raw.n || a.cols() != raw.n)
            errors.push_back("dimension mismatch: " + where + " is " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + ", expected " +
                             std::to_string(raw.n) + "x" + std::to_string(raw.n));
    };

    if (sys.point_terms.empty()) {
        errors.push_back("system needs the zero-delay point term A_0");
    } else {
        int zero_delay = 0;
        for (const auto& pt : sys.point_terms)
            if (pt.h == 0.0) ++zero_delay;
        if (zero_delay != 1)
            errors.push_back("exactly one point term must have delay 0 (found " +
                             std::to_string(zero_delay) + ")");
    }

    size_t idx = 0;
    for (const auto& pt : sys.point_terms) {
        check_matrix(pt.A, "point term " + std::to_string(idx));
        if (pt.h < 0.0)
            errors.push_back("negative delay h = " + std::to_string(pt.h) + " in point term " +
                             std::to_string(idx));
        ++idx;
    }
    idx = 0;
    for (const auto& vt : sys.volterra_terms) {
        check_matrix(vt.A, "Volterra term " + std::to_string(idx));
        if (vt.shift < 0.0)
            errors.push_back("negative delay h' in Volterra term " + std::to_string(idx));
        if (vt.kernel.kind != KernelKind::volterra)
            errors.push_back("Volterra term " + std::to_string(idx) + " carries a finite kernel");
        for (auto& e : vt.kernel.validate())
            errors.push_back("Volterra term " + std::to_string(idx) + ": " + e);
        ++idx;
    }
    idx = 0;
    for (const auto& ft : sys.finite_dist_terms) {
        check_matrix(ft.A, "finite-distributed term " + std::to_string(idx));
        if (!(ft.span > 0.0))
            errors.push_back("finite-distributed term " + std::to_string(idx) +
                             " needs span h' > 0");
        if (ft.kernel.kind != KernelKind::finite)
            errors.push_back("finite-distributed term " + std::to_string(idx) +
                             " carries a Volterra kernel");
        for (auto& e : ft.kernel.validate())
            errors.push_back("finite-distributed term " + std::to_string(idx) + ": " + e);
        if (ft.kernel.support_bound > ft.span + 1e-12)
            errors.push_back("finite kernel support exceeding declared span in term " +
                             std::to_string(idx));
        ++idx;
    }

    if (!errors.empty()) return result;

    // Normalize: zero-delay term first, h recomputed.
    auto zero_it = std::find_if(sys.point_terms.begin(), sys.point_terms.end(),
                                [](const PointTerm& pt) { return pt.h == 0.0; });
    std::rotate(sys.point_terms.begin(), zero_it, zero_it + 1);

    double h = 0.0;
    for (const auto& pt : sys.point_terms) h = std::max(h, pt.h);
    for (const auto& vt : sys.volterra_terms) h = std::max(h, vt.shift);
    for (const auto& ft : sys.finite_dist_terms) h = std::max(h, ft.span);
    sys.h = h;

    result.system = ValidatedSystem(std::move(sys));
    return result;
}

bool TimeVaryingMatrix::is_zero() const {
    for (const auto& e : entries_)
        for (const auto& t : e)
            if (t.c != 0.0) return false;
    return true;
}

MatrixXd TimeVaryingMatrix::eval(double t) const {
    MatrixXd m = MatrixXd::Zero(n_, n_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) m(r, c) = eval_exp_poly(at(r, c), t);
    return m;
}

bool PerturbationSpec::is_zero() const {
    for (const auto& m : tilde_point)
        if (!m.is_zero()) return false;
    for (const auto& m : tilde_volterra)
        if (!m.is_zero()) return false;
    for (const auto& m : tilde_finite)
        if (!m.is_zero()) return false;
    return f0.is_zero();
}

std::vector<std::string> PerturbationSpec::validate_against(const ValidatedSystem& vs) const {
    std::vector<std::string> errors;
    const auto& sys = vs.system();
    auto check_list = [&](const std::vector<TimeVaryingMatrix>& list, size_t expected,
                          const std::string& name) {
        if (!list.empty() && list.size() != expected)
            errors.push_back(name + " must be empty or match the system term count");
        for (const auto& m : list)
            if (m.dim() != sys.n) errors.push_back(name + " dimension mismatch");
    };
    check_list(tilde_point, sys.point_terms.size(), "tilde_point");
    check_list(tilde_volterra, sys.volterra_terms.size(), "tilde_volterra");
    check_list(tilde_finite, sys.finite_dist_terms.size(), "tilde_finite");
    if (K0 < 0.0) errors.push_back("K0 must be >= 0");
    if (f0.kind == ResidualTerm::Kind::constant && f0.constant.size() != sys.n)
        errors.push_back("f0 dimension mismatch");
    for (double t = 0.0; t <= 50.0; t += 0.25)
        if (gamma_eval(t) < -1e-12) {
            errors.push_back("gamma(t) must be nonnegative on [0, inf); negative at t = " +
                             std::to_string(t));
            break;
        }
    return errors;
}

}  // namespace delay_spectra
