#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "delay_spectra/common.hpp"
#include "delay_spectra/history.hpp"
#include "delay_spectra/kernel.hpp"

namespace delay_spectra {

struct PointTerm {
    MatrixXd A;
    double h = 0.0;
};

struct VolterraTerm {
    MatrixXd A;
    double shift = 0.0;  // h'_i, the point delay under the integral
    KernelSpec kernel;   // kind == volterra
};

struct FiniteDistTerm {
    MatrixXd A;
    double span = 0.0;  // h'_i, length of the trailing window
    KernelSpec kernel;  // kind == finite, support within [0, span]
};

/// The limiting equation
///   x'(t) = sum_i A_i x(t-h_i)
///         + sum_i int_0^t d(alpha_i)(tau) A_ai x(t - tau - h'_i)
///         + sum_i int_{t-h'_i}^t d(alpha_i)(t-tau) A_ai x(tau).
struct DelaySystem {
    int n = 0;
    std::vector<PointTerm> point_terms;           // exactly one with h = 0 (the A_0 term)
    std::vector<VolterraTerm> volterra_terms;
    std::vector<FiniteDistTerm> finite_dist_terms;
    double h = 0.0;  // maximal delay; recomputed by validation

    bool operator==(const DelaySystem& o) const;
};

class ValidatedSystem;
struct ValidationResult;
ValidationResult validate_system(const DelaySystem& raw);

/// A DelaySystem that passed validation; h is consistent and the zero-delay
/// point term sits first. Immutable.
class ValidatedSystem {
public:
    const DelaySystem& system() const { return sys_; }
    int dim() const { return sys_.n; }
    double max_delay() const { return sys_.h; }
    bool has_volterra() const { return !sys_.volterra_terms.empty(); }

private:
    explicit ValidatedSystem(DelaySystem sys) : sys_(std::move(sys)) {}
    DelaySystem sys_;
    friend struct ValidationResult;
    friend ValidationResult validate_system(const DelaySystem&);
};

struct ValidationResult {
    std::optional<ValidatedSystem> system;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty() && system.has_value(); }
    const ValidatedSystem& value() const {
        if (!ok()) throw std::runtime_error("validation failed: " + joined());
        return *system;
    }
    std::string joined() const;
};

/// Checks every structural invariant and returns either a normalized copy
/// (h recomputed, zero-delay term first) or the complete error list. Never
/// mutates its input; validating an already validated system is the identity.
ValidationResult validate_system(const DelaySystem& raw);

/// Entrywise time-varying matrix, each entry a sum of c t^k e^(-d t) terms.
class TimeVaryingMatrix {
public:
    TimeVaryingMatrix() = default;
    explicit TimeVaryingMatrix(int n) : n_(n), entries_(static_cast<size_t>(n) * n) {}

    static TimeVaryingMatrix zero(int n) { return TimeVaryingMatrix(n); }

    int dim() const { return n_; }
    std::vector<ExpPolyTerm>& at(int r, int c) { return entries_[idx(r, c)]; }
    const std::vector<ExpPolyTerm>& at(int r, int c) const { return entries_[idx(r, c)]; }

    bool is_zero() const;
    MatrixXd eval(double t) const;

private:
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * n_ + c; }
    int n_ = 0;
    std::vector<std::vector<ExpPolyTerm>> entries_;
};

/// Residual term f0 of the perturbation: zero, a constant vector, or a
/// bounded callable with a declared sup bound.
struct ResidualTerm {
    enum class Kind { zero, constant, callable } kind = Kind::zero;
    VectorXd constant;
    std::function<VectorXd(double)> fn;
    double sup_bound = 0.0;

    VectorXd eval(double t, int n) const {
        switch (kind) {
            case Kind::zero: return VectorXd::Zero(n);
            case Kind::constant: return constant;
            case Kind::callable: return fn(t);
        }
        return VectorXd::Zero(n);
    }
    bool is_zero() const { return kind == Kind::zero; }
};

/// Perturbation f(t, x_t): time-varying companions of every term of the
/// limiting equation plus f0, together with the declared envelope
/// |f(t, x_t)| <= gamma(t) |x_t| + K0.
struct PerturbationSpec {
    std::vector<TimeVaryingMatrix> tilde_point;
    std::vector<TimeVaryingMatrix> tilde_volterra;
    std::vector<TimeVaryingMatrix> tilde_finite;
    ResidualTerm f0;
    std::vector<ExpPolyTerm> gamma;
    double K0 = 0.0;

    static PerturbationSpec zero() { return {}; }

    double gamma_eval(double t) const { return eval_exp_poly(gamma, t); }
    bool is_zero() const;

    /// Structural checks against a validated system (sizes, gamma >= 0, K0 >= 0).
    std::vector<std::string> validate_against(const ValidatedSystem& vs) const;
};

}  // namespace delay_spectra
