#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace delay_spectra {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

enum class Norm { l1, l2, linf };

inline const char* norm_name(Norm n) {
    switch (n) {
        case Norm::l1: return "l1";
        case Norm::l2: return "l2";
        case Norm::linf: return "linf";
    }
    return "?";
}

inline Norm parse_norm(const std::string& s) {
    if (s == "l1") return Norm::l1;
    if (s == "l2") return Norm::l2;
    if (s == "linf") return Norm::linf;
    throw std::invalid_argument("unknown norm: " + s);
}

inline double vec_norm(const VectorXd& v, Norm n) {
    switch (n) {
        case Norm::l1: return v.lpNorm<1>();
        case Norm::l2: return v.norm();
        case Norm::linf: return v.lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

/// Spectral (induced 2-) norm of a real or complex matrix.
inline double spectral_norm(const MatrixXd& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    return a.jacobiSvd().singularValues()(0);
}
inline double spectral_norm(const MatrixXcd& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    return a.jacobiSvd().singularValues()(0);
}

struct SimulationError : std::runtime_error {
    double time;
    SimulationError(const std::string& what, double t)
        : std::runtime_error(what), time(t) {}
};

struct EnvelopeViolation : SimulationError {
    double realized, bound;
    EnvelopeViolation(double t, double realized_, double bound_)
        : SimulationError("envelope violation at t=" + std::to_string(t) +
                              ": |f| = " + std::to_string(realized_) +
                              " > gamma*|x_t| + K0 = " + std::to_string(bound_),
                          t),
          realized(realized_), bound(bound_) {}
};

struct KernelPoleError : std::runtime_error {
    Complex at;
    explicit KernelPoleError(Complex s)
        : std::runtime_error("kernel transform pole at s = (" +
                             std::to_string(s.real()) + ", " + std::to_string(s.imag()) + ")"),
          at(s) {}
};

struct SingularPointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpectrumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parallelism cap from DELAY_SPECTRA_THREADS (0 or unset = auto).
inline unsigned thread_cap() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("DELAY_SPECTRA_THREADS");
    if (env == nullptr) return hw;
    long v = std::strtol(env, nullptr, 10);
    if (v <= 0) return hw;
    return static_cast<unsigned>(std::min<long>(v, 256));
}

/// Fixed 17-significant-digit decimal rendering used by every artifact writer.
inline std::string format17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace delay_spectra
