#include "dgstab/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dgstab/errors.hpp"

namespace dgstab {

Piecewise1D::Piecewise1D(std::vector<double> breakpoints, std::vector<double> slopes, double anchor)
    : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)), anchor_(anchor) {
    if (slopes_.size() != breakpoints_.size() + 1) {
        throw ValidationError("piecewise map needs exactly one more slope than breakpoints");
    }
    for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
        if (!(breakpoints_[k] > breakpoints_[k - 1])) throw ValidationError("breakpoints must be strictly increasing");
    }
    for (double s : slopes_) {
        if (s == 0.0 || !std::isfinite(s)) throw ValidationError("piecewise slopes must be finite and nonzero");
    }
    if (!std::isfinite(anchor_)) throw ValidationError("anchor value must be finite");
    values_.resize(breakpoints_.size());
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
        values_[k] = k == 0 ? anchor_ : values_[k - 1] + slopes_[k] * (breakpoints_[k] - breakpoints_[k - 1]);
    }
}

Piecewise1D Piecewise1D::absolute_value() { return Piecewise1D({0.0}, {-1.0, 1.0}, 0.0); }

Piecewise1D Piecewise1D::linear(double slope) { return Piecewise1D({}, {slope}, 0.0); }

std::size_t Piecewise1D::piece_of(double x) const noexcept {
    return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                                    breakpoints_.begin());
}

double Piecewise1D::operator()(double x) const noexcept {
    if (breakpoints_.empty()) return anchor_ + slopes_[0] * x;
    const std::size_t k = piece_of(x);
    if (k == 0) return values_[0] + slopes_[0] * (x - breakpoints_[0]);
    return values_[k - 1] + slopes_[k] * (x - breakpoints_[k - 1]);
}

double Piecewise1D::derivative(double x) const noexcept { return slopes_[piece_of(x)]; }

double Piecewise1D::intercept(std::size_t piece) const {
    if (piece >= slopes_.size()) throw ValidationError("piece index out of range");
    if (breakpoints_.empty()) return anchor_;
    if (piece == 0) return values_[0] - slopes_[0] * breakpoints_[0];
    return values_[piece - 1] - slopes_[piece] * breakpoints_[piece - 1];
}

double Piecewise1D::piece_lo(std::size_t piece) const {
    if (piece >= slopes_.size()) throw ValidationError("piece index out of range");
    return piece == 0 ? -std::numeric_limits<double>::infinity() : breakpoints_[piece - 1];
}

double Piecewise1D::piece_hi(std::size_t piece) const {
    if (piece >= slopes_.size()) throw ValidationError("piece index out of range");
    return piece == breakpoints_.size() ? std::numeric_limits<double>::infinity() : breakpoints_[piece];
}

double Piecewise1D::alpha_min() const noexcept {
    double a = std::numeric_limits<double>::infinity();
    for (double s : slopes_) a = std::min(a, std::abs(s));
    return a;
}

double Piecewise1D::alpha_max() const noexcept {
    double a = 0.0;
    for (double s : slopes_) a = std::max(a, std::abs(s));
    return a;
}

double Piecewise1D::critical_gap() const noexcept {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < values_.size(); ++k) g = std::min(g, std::abs(values_[k] - values_[k - 1]));
    return g;
}

}  // namespace dgstab
