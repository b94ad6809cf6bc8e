#pragma once

#include <string>
#include <vector>

#include "delay_spectra/common.hpp"

namespace delay_spectra {

/// Initial history phi on [-h, 0]: piecewise cubic per component, finitely
/// many bounded jumps at the breakpoints, phi(0) pinned by terminal_value.
class HistoryFunction {
public:
    HistoryFunction() = default;

    /// breakpoints: increasing, breakpoints.front() = -h, breakpoints.back() = 0.
    /// pieces[i]: n x 4 coefficient matrix for [b_i, b_{i+1}); row r gives
    /// x_r(t) = c0 + c1 u + c2 u^2 + c3 u^3 with u = t - b_i.
    HistoryFunction(std::vector<double> breakpoints, std::vector<MatrixXd> pieces,
                    VectorXd terminal_value);

    static HistoryFunction constant(const VectorXd& value, double h);

    VectorXd eval(double t) const;
    double h() const { return breakpoints_.empty() ? 0.0 : -breakpoints_.front(); }
    int dim() const { return static_cast<int>(terminal_value_.size()); }
    const VectorXd& terminal_value() const { return terminal_value_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<MatrixXd>& pieces() const { return pieces_; }

    /// sup over [-h, 0] of the chosen vector norm (piece endpoints, component
    /// extrema and a dense sweep as candidate points).
    double sup_norm(Norm norm = Norm::l2) const;

    std::vector<std::string> validate() const;

    bool operator==(const HistoryFunction& o) const;

private:
    std::vector<double> breakpoints_;
    std::vector<MatrixXd> pieces_;
    VectorXd terminal_value_;
};

}  // namespace delay_spectra
