#include "delay_spectra/history.hpp"

#include <algorithm>
#include <cmath>

namespace delay_spectra {

HistoryFunction::HistoryFunction(std::vector<double> breakpoints, std::vector<MatrixXd> pieces,
                                 VectorXd terminal_value)
    : breakpoints_(std::move(breakpoints)),
      pieces_(std::move(pieces)),
      terminal_value_(std::move(terminal_value)) {}

HistoryFunction HistoryFunction::constant(const VectorXd& value, double h) {
    const int n = static_cast<int>(value.size());
    MatrixXd coeff = MatrixXd::Zero(n, 4);
    coeff.col(0) = value;
    if (h <= 0.0) {
        // Delay-free system: the history is just the initial point.
        return HistoryFunction({0.0, 0.0}, {coeff}, value);
    }
    return HistoryFunction({-h, 0.0}, {coeff}, value);
}

VectorXd HistoryFunction::eval(double t) const {
    if (t >= 0.0) {
        if (t > 1e-12) throw std::out_of_range("history evaluated at t > 0");
        return terminal_value_;
    }
    double lo = breakpoints_.front();
    if (t < lo) {
        if (t < lo - 1e-9 * (1.0 + std::abs(lo)))
            throw std::out_of_range("history evaluated before -h");
        t = lo;
    }
    // Piece index: last breakpoint <= t (pieces are [b_i, b_{i+1})).
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    size_t idx = static_cast<size_t>(std::max<std::ptrdiff_t>(0, it - breakpoints_.begin() - 1));
    idx = std::min(idx, pieces_.size() - 1);
    const MatrixXd& c = pieces_[idx];
    double u = t - breakpoints_[idx];
    VectorXd out(c.rows());
    for (Eigen::Index r = 0; r < c.rows(); ++r)
        out(r) = ((c(r, 3) * u + c(r, 2)) * u + c(r, 1)) * u + c(r, 0);
    return out;
}

double HistoryFunction::sup_norm(Norm norm) const {
    double best = vec_norm(terminal_value_, norm);
    if (breakpoints_.size() < 2) return best;
    std::vector<double> candidates;
    for (size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
        double a = breakpoints_[i], b = breakpoints_[i + 1];
        if (b <= a) continue;
        candidates.push_back(a);
        candidates.push_back(std::nextafter(b, a));
        const MatrixXd& c = pieces_[std::min(i, pieces_.size() - 1)];
        for (Eigen::Index r = 0; r < c.rows(); ++r) {
            // Critical points of the cubic component: 3 c3 u^2 + 2 c2 u + c1 = 0.
            double a2 = 3.0 * c(r, 3), a1 = 2.0 * c(r, 2), a0 = c(r, 1);
            if (std::abs(a2) > 1e-300) {
                double disc = a1 * a1 - 4.0 * a2 * a0;
                if (disc >= 0.0) {
                    double sq = std::sqrt(disc);
                    for (double u : {(-a1 + sq) / (2 * a2), (-a1 - sq) / (2 * a2)}) {
                        double t = a + u;
                        if (t > a && t < b) candidates.push_back(t);
                    }
                }
            } else if (std::abs(a1) > 1e-300) {
                double t = a - a0 / a1;
                if (t > a && t < b) candidates.push_back(t);
            }
        }
        int sweep = 64;
        for (int j = 1; j < sweep; ++j) candidates.push_back(a + (b - a) * j / sweep);
    }
    for (double t : candidates) best = std::max(best, vec_norm(eval(std::min(t, -0.0)), norm));
    return best;
}

std::vector<std::string> HistoryFunction::validate() const {
    std::vector<std::string> errors;
    if (breakpoints_.size() < 2) errors.push_back("history needs at least two breakpoints");
    if (!breakpoints_.empty() && std::abs(breakpoints_.back()) > 1e-12)
        errors.push_back("history breakpoints must end at 0");
    for (size_t i = 0; i + 1 < breakpoints_.size(); ++i)
        if (breakpoints_[i + 1] < breakpoints_[i])
            errors.push_back("history breakpoints not increasing");
    if (pieces_.size() + 1 != breakpoints_.size() && breakpoints_.size() >= 2)
        errors.push_back("history piece count must equal breakpoint count - 1");
    for (const auto& p : pieces_) {
        if (p.cols() != 4) errors.push_back("history pieces must be cubic (4 coefficients)");
        if (p.rows() != terminal_value_.size())
            errors.push_back("history piece dimension mismatch");
    }
    return errors;
}

bool HistoryFunction::operator==(const HistoryFunction& o) const {
    if (breakpoints_ != o.breakpoints_) return false;
    if (pieces_.size() != o.pieces_.size()) return false;
    for (size_t i = 0; i < pieces_.size(); ++i)
        if (pieces_[i] != o.pieces_[i]) return false;
    return terminal_value_ == o.terminal_value_;
}

}  // namespace delay_spectra
