#include "delay_spectra/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "delay_spectra/dual.hpp"

namespace delay_spectra {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class S>
std::vector<S> characteristic_entries(const DelaySystem& sys, const S& s) {
    const int n = sys.n;
    std::vector<S> m(static_cast<size_t>(n) * n, S(0.0));
    auto add = [&](int r, int c, const S& v) { m[static_cast<size_t>(r) * n + c] += v; };

    for (int i = 0; i < n; ++i) add(i, i, s);
    for (const auto& pt : sys.point_terms) {
        S e = exp_scalar(-s * S(pt.h));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (pt.A(r, c) != 0.0) add(r, c, -S(pt.A(r, c)) * e);
    }
    // s a^(s) e(-h's) - alpha(0) e(-h's) = da^(s) e(-h's); the standalone
    // alpha(0) A_a term of the first Volterra kernel survives the cancellation.
    bool first = true;
    for (const auto& vt : sys.volterra_terms) {
        S da = vt.kernel.transform_dalpha<S>(s);
        S e = exp_scalar(-s * S(vt.shift));
        S w = da * e;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (vt.A(r, c) != 0.0) add(r, c, -S(vt.A(r, c)) * w);
        if (first) {
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    if (vt.A(r, c) != 0.0)
                        add(r, c, S(vt.kernel.alpha_at_zero) * S(vt.A(r, c)));
            first = false;
        }
    }
    for (const auto& ft : sys.finite_dist_terms) {
        S da = ft.kernel.transform_dalpha<S>(s);
        S w = da * (S(1.0) - exp_scalar(-s * S(ft.span)));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (ft.A(r, c) != 0.0) add(r, c, -S(ft.A(r, c)) * w);
    }
    return m;
}

/// In-place LU determinant with partial pivoting over a generic scalar.
template <class S>
S det_lu(std::vector<S>& a, int n) {
    S det = S(1.0);
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = abs_value(a[static_cast<size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double v = abs_value(a[static_cast<size_t>(r) * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0) {
            if (col == n - 1) {
                // Exact zero last pivot: no elimination left, and the dual
                // derivative part of the product is still meaningful.
                det *= a[static_cast<size_t>(col) * n + col];
                return det;
            }
            return S(0.0);
        }
        if (pivot != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<size_t>(pivot) * n + c], a[static_cast<size_t>(col) * n + c]);
            det = -det;
        }
        S piv = a[static_cast<size_t>(col) * n + col];
        det *= piv;
        for (int r = col + 1; r < n; ++r) {
            S f = a[static_cast<size_t>(r) * n + col] / piv;
            for (int c = col + 1; c < n; ++c)
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
            a[static_cast<size_t>(r) * n + col] = S(0.0);
        }
    }
    return det;
}

struct ContourTooClose : std::runtime_error {
    ContourTooClose() : std::runtime_error("contour passes too close to a root") {}
};

class DetEvaluator {
public:
    explicit DetEvaluator(const DelaySystem& sys) : sys_(sys) {}

    Complex det(Complex s) const {
        auto m = characteristic_entries<Complex>(sys_, s);
        return det_lu(m, sys_.n);
    }

    std::pair<Complex, Complex> det_and_derivative(Complex s) const {
        auto m = characteristic_entries<CDual>(sys_, CDual::variable(s));
        CDual d = det_lu(m, sys_.n);
        return {d.v, d.d};
    }

    /// Total phase change of det D along the segment [a, b], adaptively
    /// bisected until successive increments stay below pi/2 and the local
    /// rotation rate |d/ds log det| rules out whole-turn aliasing.
    double edge_phase(Complex a, Complex b, double scale, int depth = 0) const {
        (void)scale;
        return phase_between(sample(a), sample(b), depth);
    }

private:
    struct Node {
        Complex s;
        Complex f;
        double rate;  // |det'/det|
    };

    Node sample(Complex s) const {
        auto [f, df] = det_and_derivative(s);
        double fa = std::abs(f);
        if (fa < 1e-290) throw ContourTooClose();
        return {s, f, std::abs(df) / fa};
    }

    double phase_between(const Node& a, const Node& b, int depth) const {
        double d_arg = std::arg(b.f / a.f);
        double len = std::abs(b.s - a.s);
        bool rate_ok = len * std::max(a.rate, b.rate) < 2.0;
        if (std::abs(d_arg) < kPi / 2.0 && rate_ok && depth >= 2) return d_arg;
        if (depth > 48) throw ContourTooClose();
        Node mid = sample(0.5 * (a.s + b.s));
        return phase_between(a, mid, depth + 1) + phase_between(mid, b, depth + 1);
    }

    const DelaySystem& sys_;
};

int winding_count(const DetEvaluator& ev, const Rect& r) {
    Complex c1(r.re_min, r.im_min), c2(r.re_max, r.im_min), c3(r.re_max, r.im_max),
        c4(r.re_min, r.im_max);
    double scale = std::max({std::abs(c1), std::abs(c3), 1.0});
    double total = ev.edge_phase(c1, c2, scale) + ev.edge_phase(c2, c3, scale) +
                   ev.edge_phase(c3, c4, scale) + ev.edge_phase(c4, c1, scale);
    double turns = total / (2.0 * kPi);
    int count = static_cast<int>(std::lround(turns));
    if (std::abs(turns - count) > 0.25) throw ContourTooClose();
    return count;
}

/// Winding count with fallback nudges of the rectangle edges (outward) when
/// the contour runs into a root.
int winding_with_nudge(const DetEvaluator& ev, Rect& r, int max_nudges = 8) {
    double w = std::max(r.width(), 1e-12), h = std::max(r.height(), 1e-12);
    for (int attempt = 0;; ++attempt) {
        try {
            return winding_count(ev, r);
        } catch (const ContourTooClose&) {
            if (attempt >= max_nudges) throw;
            double f = 0.013 * (attempt + 1);
            r.re_min -= f * w;
            r.re_max += f * w * 1.37;
            r.im_min -= f * h * 0.83;
            r.im_max += f * h * 1.11;
        }
    }
}

struct RootAccumulator {
    std::vector<CharacteristicRoot> roots;
    bool all_isolated = true;

    void add(CharacteristicRoot root) {
        for (auto& existing : roots) {
            double scale = 1.0 + std::abs(existing.lambda);
            if (std::abs(existing.lambda - root.lambda) < 1e-7 * scale) {
                if (root.residual < existing.residual) existing = root;
                return;
            }
        }
        roots.push_back(std::move(root));
    }
};

bool newton_refine(const DetEvaluator& ev, Complex start, const Rect& box, double root_tol,
                   CharacteristicRoot& out) {
    Complex s = start;
    double wander = 2.0 * std::max(box.width(), box.height());
    // Acceptance is tight: a root that converged outside this box belongs to a
    // sibling; accepting it here would orphan the root the count refers to.
    double accept = 0.02 * std::max(box.width(), box.height()) + 10.0 * root_tol;
    for (int it = 0; it < 80; ++it) {
        auto [d, dd] = ev.det_and_derivative(s);
        if (abs_value(dd) == 0.0) return false;
        Complex stepc = d / dd;
        s -= stepc;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
        if (!box.contains(s, wander)) return false;
        if (std::abs(stepc) < root_tol * (1.0 + std::abs(s))) {
            auto [dfinal, ddf] = ev.det_and_derivative(s);
            (void)ddf;
            out.lambda = s;
            out.multiplicity = 1;
            out.residual = std::abs(dfinal);
            out.enclosure = box;
            out.newton_converged = true;
            return box.contains(s, accept);
        }
    }
    return false;
}

void subdivide(const DetEvaluator& ev, Rect rect, int count, double root_tol,
               RootAccumulator& acc, int depth) {
    if (count <= 0) return;
    double scale = 1.0 + std::max({std::abs(rect.re_min), std::abs(rect.re_max),
                                   std::abs(rect.im_min), std::abs(rect.im_max)});
    double min_size = std::max(64.0 * root_tol, 1e-9) * scale;

    if (count == 1) {
        Complex center(0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max));
        CharacteristicRoot root;
        if (newton_refine(ev, center, rect, root_tol, root)) {
            acc.add(root);
            return;
        }
    }

    if (std::max(rect.width(), rect.height()) <= min_size || depth > 60) {
        CharacteristicRoot root;
        root.lambda = Complex(0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max));
        root.multiplicity = count;
        root.residual = std::abs(ev.det(root.lambda));
        root.enclosure = rect;
        root.newton_converged = false;
        if (count == 1) acc.all_isolated = false;
        acc.add(root);
        return;
    }

    bool vertical = rect.width() >= rect.height();
    // Split fractions retried when the cut line lands on a root.
    const double fractions[] = {0.5, 0.55, 0.45, 0.6, 0.4, 0.52, 0.48, 0.57};
    for (double f : fractions) {
        Rect a = rect, b = rect;
        if (vertical) {
            double cut = rect.re_min + f * rect.width();
            a.re_max = cut;
            b.re_min = cut;
        } else {
            double cut = rect.im_min + f * rect.height();
            a.im_max = cut;
            b.im_min = cut;
        }
        try {
            int ca = winding_count(ev, a);
            int cb = winding_count(ev, b);
            if (ca + cb != count) continue;  // cut too close to a root; retry
            subdivide(ev, a, ca, root_tol, acc, depth + 1);
            subdivide(ev, b, cb, root_tol, acc, depth + 1);
            return;
        } catch (const ContourTooClose&) {
            continue;
        }
    }
    // Every cut failed: report the box as an unresolved cluster.
    CharacteristicRoot root;
    root.lambda = Complex(0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max));
    root.multiplicity = count;
    root.residual = std::abs(ev.det(root.lambda));
    root.enclosure = rect;
    root.newton_converged = false;
    acc.all_isolated = false;
    acc.add(root);
}

bool system_is_real(const DelaySystem&) { return true; }

}  // namespace

MatrixXcd characteristic_matrix(const ValidatedSystem& system, Complex s) {
    const DelaySystem& sys = system.system();
    auto entries = characteristic_entries<Complex>(sys, s);
    MatrixXcd m(sys.n, sys.n);
    for (int r = 0; r < sys.n; ++r)
        for (int c = 0; c < sys.n; ++c) m(r, c) = entries[static_cast<size_t>(r) * sys.n + c];
    return m;
}

std::pair<Complex, Complex> characteristic_det(const ValidatedSystem& system, Complex s) {
    DetEvaluator ev(system.system());
    return ev.det_and_derivative(s);
}

double sigma_cap(const ValidatedSystem& system) {
    const DelaySystem& sys = system.system();
    double cap = 0.0;
    for (const auto& pt : sys.point_terms) cap += spectral_norm(pt.A);
    for (const auto& vt : sys.volterra_terms)
        cap += vt.kernel.total_variation() * spectral_norm(vt.A) +
               std::abs(vt.kernel.alpha_at_zero) * spectral_norm(vt.A);
    for (const auto& ft : sys.finite_dist_terms)
        cap += 2.0 * ft.kernel.total_variation() * spectral_norm(ft.A);
    return cap;
}

double default_omega_max(const ValidatedSystem& system) {
    const DelaySystem& sys = system.system();
    double s = 0.0;
    for (const auto& pt : sys.point_terms) s += spectral_norm(pt.A);
    for (const auto& vt : sys.volterra_terms)
        s += vt.kernel.total_variation() * spectral_norm(vt.A);
    for (const auto& ft : sys.finite_dist_terms)
        s += ft.kernel.total_variation() * spectral_norm(ft.A);
    return 10.0 * (1.0 + s);
}

RootSet find_roots(const ValidatedSystem& system, Rect region, double root_tol) {
    if (!(region.re_max > region.re_min) || !(region.im_max > region.im_min))
        throw SpectrumError("empty root-search region");
    const DelaySystem& sys = system.system();
    DetEvaluator ev(sys);

    RootSet out;
    Rect working = region;
    int total;
    try {
        total = winding_with_nudge(ev, working);
    } catch (const ContourTooClose&) {
        throw SpectrumError("contour passes too close to a root after max nudges");
    }
    out.region = working;
    out.contour_count = total;

    RootAccumulator acc;
    subdivide(ev, working, total, root_tol, acc, 0);

    if (system_is_real(sys)) {
        // Conjugate closure: mirror roots whose conjugate falls outside the
        // searched strip.
        std::vector<CharacteristicRoot> mirrored;
        for (const auto& r : acc.roots) {
            if (std::abs(r.lambda.imag()) <= 1e-9 * (1.0 + std::abs(r.lambda))) continue;
            Complex conj = std::conj(r.lambda);
            bool present = false;
            for (const auto& other : acc.roots)
                if (std::abs(other.lambda - conj) < 1e-7 * (1.0 + std::abs(conj))) present = true;
            if (!present) {
                CharacteristicRoot m = r;
                m.lambda = conj;
                m.enclosure = Rect{r.enclosure.re_min, r.enclosure.re_max, -r.enclosure.im_max,
                                   -r.enclosure.im_min};
                mirrored.push_back(std::move(m));
            }
        }
        for (auto& m : mirrored) acc.add(std::move(m));
    }

    out.roots = std::move(acc.roots);
    std::sort(out.roots.begin(), out.roots.end(), [](const auto& a, const auto& b) {
        if (a.lambda.real() != b.lambda.real()) return a.lambda.real() < b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
    });

    int found_in_region = 0;
    for (const auto& r : out.roots)
        if (working.contains(r.lambda, 1e-9)) found_in_region += r.multiplicity;
    out.exhaustive = (found_in_region == total) && acc.all_isolated;

    out.abscissa = -std::numeric_limits<double>::infinity();
    for (const auto& r : out.roots) out.abscissa = std::max(out.abscissa, r.lambda.real());
    return out;
}

AbscissaResult spectral_abscissa(const ValidatedSystem& system, double sigma_min,
                                 double omega_max, double root_tol) {
    const DelaySystem& sys = system.system();
    if (omega_max <= 0.0) omega_max = default_omega_max(system);
    double cap = sigma_cap(system) + 0.5;

    double lo = sigma_min;
    // Volterra transform poles at s = -d make det D meromorphic; keep the
    // region strictly right of the poles so winding numbers count zeros only.
    for (const auto& vt : sys.volterra_terms) {
        double d = vt.kernel.min_decay();
        if (std::isfinite(d)) lo = std::max(lo, -d + std::max(1e-3, 0.01 * d));
    }
    if (lo >= cap) throw SpectrumError("empty abscissa search region");

    Rect region{lo, cap, -1e-3, omega_max};
    RootSet rs = find_roots(system, region, root_tol);

    AbscissaResult result;
    result.all = std::move(rs);
    if (result.all.roots.empty()) {
        result.mu = -std::numeric_limits<double>::infinity();
        return result;
    }
    result.mu = result.all.abscissa;
    for (const auto& r : result.all.roots)
        if (r.lambda.real() >= result.mu - 1e-7) result.dominant.push_back(r);
    return result;
}

LambdaSets lambda_sets(const RootSet& roots, double mu, double tie_tol) {
    LambdaSets out;
    out.mu = mu;
    for (const auto& r : roots.roots) {
        if (std::abs(r.lambda.real() - mu) <= tie_tol) out.lambda0.push_back(r);
        else if (r.lambda.real() > mu + tie_tol) out.lambda1.push_back(r);
        else continue;
        out.lambda_all.push_back(r);
    }
    return out;
}

Eigensolution eigensolution(const ValidatedSystem& system, const CharacteristicRoot& root) {
    if (root.multiplicity != 1)
        throw SpectrumError("eigensolution: only simple roots are supported");
    MatrixXcd delta = characteristic_matrix(system, root.lambda);
    Eigen::JacobiSVD<MatrixXcd> svd(delta, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int n = static_cast<int>(sv.size());
    double scale = sv(0) > 0.0 ? sv(0) : 1.0;
    if (n >= 2 && sv(n - 2) < 1e-8 * scale)
        throw SpectrumError("eigensolution: null space numerically 2-dimensional");
    VectorXcd v = svd.matrixV().col(n - 1);
    // Normalize: unit length, first nonzero component positive-real.
    v.normalize();
    for (int i = 0; i < n; ++i) {
        if (std::abs(v(i)) > 1e-12) {
            Complex phase = v(i) / std::abs(v(i));
            v /= phase;
            break;
        }
    }
    Eigensolution sol;
    sol.lambda = root.lambda;
    sol.v = v;
    sol.residual = (delta * v).norm();
    // For n = 1 the whole matrix vanishes at the root; fall back to a system
    // magnitude so the residual gate stays meaningful.
    double scale_ref = std::max(delta.norm(), 1.0 + std::abs(root.lambda));
    if (sol.residual > 1e-8 * scale_ref)
        throw SpectrumError("eigensolution residual too large");
    return sol;
}

}  // namespace delay_spectra
